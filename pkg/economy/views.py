# economy/views.py
import logging

from rest_framework import status
from rest_framework.permissions import IsAuthenticated
from rest_framework.response import Response
from rest_framework.views import APIView

from config.exceptions import SolverError
from economy.elasticities import ANALYTIC, elasticity_report, reform_effect
from economy.equilibrium import industry_equilibrium, profit_maximize
from economy.serializers import (
    ElasticityConfigSerializer,
    ElasticityReportSerializer,
    EconomyParamsSerializer,
    FirmEquilibriumSerializer,
    IndustryEquilibriumSerializer,
    ReformEffectSerializer,
    params_from,
)

logger = logging.getLogger(__name__)


def _solver_failure(exc):
    diagnostics = {k: repr(v) for k, v in exc.diagnostics.items() if k != "trace"}
    return Response(
        {"detail": str(exc), "diagnostics": diagnostics},
        status=status.HTTP_422_UNPROCESSABLE_ENTITY,
    )


class SolveView(APIView):
    """POST EconomyParams, get the single-firm equilibrium."""

    permission_classes = [IsAuthenticated]

    def post(self, request):
        serializer = EconomyParamsSerializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        try:
            eq = profit_maximize(params_from(serializer.validated_data))
        except SolverError as e:
            logger.error(f"Equilibrium solve failed: {e}")
            return _solver_failure(e)
        return Response(FirmEquilibriumSerializer(eq).data)


class IndustryView(APIView):
    permission_classes = [IsAuthenticated]

    def post(self, request):
        serializer = EconomyParamsSerializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        try:
            eq = industry_equilibrium(params_from(serializer.validated_data))
        except SolverError as e:
            logger.error(f"Industry equilibrium failed: {e}")
            return _solver_failure(e)
        return Response(IndustryEquilibriumSerializer(eq).data)


class ElasticitiesView(APIView):
    """
    POST {"params": {...}, "method": "numeric" | "analytic", "phi1": ..., "phi2": ...}.

    Numeric requests also return the reform effect at (phi1, phi2).
    """

    permission_classes = [IsAuthenticated]

    def post(self, request):
        serializer = ElasticityConfigSerializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        data = serializer.validated_data
        params = params_from(data["params"])
        try:
            report = elasticity_report(params, method=data["method"], step=data["step"], richardson=data["richardson"])
            payload = {"report": ElasticityReportSerializer(report).data}
            if data["method"] != ANALYTIC:
                effect = reform_effect(params, data["phi1"], data["phi2"], step=data["step"], source=data["source"])
                payload["reform_effect"] = ReformEffectSerializer(effect).data
        except SolverError as e:
            logger.error(f"Elasticity computation failed: {e}")
            return _solver_failure(e)
        return Response(payload)
