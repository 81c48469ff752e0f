from django.urls import path

from .views import ElasticitiesView, IndustryView, SolveView

urlpatterns = [
    path("solve/", SolveView.as_view(), name="economy_solve"),
    path("industry/", IndustryView.as_view(), name="economy_industry"),
    path("elasticities/", ElasticitiesView.as_view(), name="economy_elasticities"),
]
