"""
Validación de SystemConfig con Django REST framework.

Formato JSON aceptado::

    {
      "template": "custom",
      "dimension": 2,
      "metric": "identity" | {"diagonal": [...]} | {"full": [[...], ...]},
      "potential": "alpha*z",
      "constraints": [["q2", "1"]],
      "parameters": {"alpha": 0.5},
      "sample_box": [-1, 1] | [[lo, hi], ...]
    }
"""

from rest_framework import serializers

from .services.catalog import CUSTOM, TEMPLATE_FIXED_KEYS, TEMPLATE_NAMES


class SystemConfigSerializer(serializers.Serializer):
    template = serializers.ChoiceField(choices=list(TEMPLATE_NAMES) + [CUSTOM], default=CUSTOM)
    dimension = serializers.IntegerField(min_value=1, required=False)
    metric = serializers.JSONField(required=False)
    potential = serializers.CharField(required=False, default='0', trim_whitespace=True)
    constraints = serializers.ListField(
        child=serializers.ListField(child=serializers.CharField()),
        required=False,
        default=list,
    )
    parameters = serializers.DictField(child=serializers.FloatField(), required=False, default=dict)
    sample_box = serializers.JSONField(required=False)

    def validate_metric(self, value):
        if value == 'identity':
            return value
        if isinstance(value, dict) and len(value) == 1:
            kind, entries = next(iter(value.items()))
            if kind == 'diagonal' and _is_string_list(entries):
                return value
            if kind == 'full' and isinstance(entries, list) and all(_is_string_list(row) for row in entries):
                return value
        raise serializers.ValidationError(
            "La métrica debe ser 'identity', {'diagonal': [...]} o {'full': [[...]]}"
        )

    def validate_sample_box(self, value):
        boxes = value if value and isinstance(value[0], list) else [value]
        for box in boxes:
            if not (isinstance(box, list) and len(box) == 2 and all(_is_number(v) for v in box)):
                raise serializers.ValidationError("Cada caja debe ser [lo, hi] numérico")
            if not box[0] < box[1]:
                raise serializers.ValidationError(f"Caja vacía: {box}")
        return value

    def validate(self, attrs):
        if attrs.get('template', CUSTOM) != CUSTOM:
            fixed = sorted(set(TEMPLATE_FIXED_KEYS) & set(self.initial_data))
            if fixed:
                raise serializers.ValidationError(
                    {key: f"La plantilla {attrs['template']} fija este campo; usa template=custom" for key in fixed}
                )
            return attrs
        if 'dimension' not in attrs:
            raise serializers.ValidationError({'dimension': "Requerido para sistemas custom"})
        n = attrs['dimension']
        metric = attrs.setdefault('metric', 'identity')
        if isinstance(metric, dict):
            kind, entries = next(iter(metric.items()))
            rows = [entries] if kind == 'diagonal' else entries
            if any(len(row) != n for row in rows) or (kind == 'full' and len(rows) != n):
                raise serializers.ValidationError({'metric': f"Dimensiones incompatibles con n={n}"})
        constraints = attrs.get('constraints') or []
        if any(len(row) != n for row in constraints):
            raise serializers.ValidationError({'constraints': f"Cada fila debe tener {n} entradas"})
        if len(constraints) >= n:
            raise serializers.ValidationError({'constraints': f"Se requieren k < n restricciones (k={len(constraints)})"})
        box = attrs.get('sample_box')
        if box and isinstance(box[0], list) and len(box) != n:
            raise serializers.ValidationError({'sample_box': f"Se esperaban {n} cajas"})
        return attrs


def _is_string_list(value) -> bool:
    return isinstance(value, list) and all(isinstance(v, str) for v in value)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)
