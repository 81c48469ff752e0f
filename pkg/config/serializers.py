# config/serializers.py
from rest_framework import serializers

from config.exceptions import ConfigurationError


class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare, at any nesting level."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ["Unknown configuration key."] for key in unknown})
        return super().to_internal_value(data)


def _first_error(detail, prefix=""):
    """(dotted key, message) of the first leaf in a DRF error tree."""
    if isinstance(detail, dict):
        for key, value in detail.items():
            name = key if key != "non_field_errors" else ""
            path = f"{prefix}.{name}" if prefix and name else (name or prefix)
            return _first_error(value, path)
    if isinstance(detail, list) and detail:
        if all(not isinstance(item, (dict, list)) for item in detail):
            return prefix, str(detail[0])
        for index, item in enumerate(detail):
            if item:
                return _first_error(item, f"{prefix}[{index}]")
    return prefix, str(detail)


def validate_config(serializer_class, data, **kwargs):
    """Validate a config mapping, raising ConfigurationError naming the offending key."""
    serializer = serializer_class(data=data or {}, **kwargs)
    if not serializer.is_valid():
        key, message = _first_error(serializer.errors)
        raise ConfigurationError(f"{key or 'config'}: {message}", key=key or None)
    return serializer.validated_data
