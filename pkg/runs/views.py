# runs/views.py
from rest_framework import generics
from rest_framework.permissions import IsAuthenticated

from .models import RunRecord
from .serializers import RunRecordSerializer


class RunListView(generics.ListAPIView):
    serializer_class = RunRecordSerializer
    permission_classes = [IsAuthenticated]

    def get_queryset(self):
        qs = RunRecord.objects.all()

        command = self.request.query_params.get("command")
        if command:
            qs = qs.filter(command=command)

        status = self.request.query_params.get("status")
        if status:
            qs = qs.filter(status=status.upper())

        return qs


class RunDetailView(generics.RetrieveAPIView):
    queryset = RunRecord.objects.all()
    serializer_class = RunRecordSerializer
    permission_classes = [IsAuthenticated]
