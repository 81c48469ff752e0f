from django.urls import path

from .views import RunDetailView, RunListView

urlpatterns = [
    path("", RunListView.as_view(), name="run_list"),
    path("<int:pk>/", RunDetailView.as_view(), name="run_detail"),
]
