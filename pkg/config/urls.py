from django.contrib import admin
from django.urls import path, include

urlpatterns = [
    path("admin/", admin.site.urls),

    path("api/economy/", include("economy.urls")),
    path("api/runs/", include("runs.urls")),
]
