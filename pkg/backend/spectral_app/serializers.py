"""
DRF serializers turning JSON configuration into library objects.

Every serializer validates its payload and ``save()`` returns the built
measure, test function or sigma-function.  Measure payloads dispatch on
``kind``, test function payloads on ``form``.
"""
import math
from dataclasses import replace

from rest_framework import serializers

from spectral import measure as measures
from spectral import testfn
from spectral.exceptions import ConfigError
from spectral.expressions import parse_expression
from spectral.sigmaspace import SigmaFunction

MEASURE_KINDS = ("density", "lebesgue", "atomic", "lattice", "dirac_comb", "ifs", "cantor", "mixture", "shifted",
                 "convolution", "fbm")
TESTFN_FORMS = ("gaussian_packet", "hermite", "fourier_side", "combination")
METHODS = ("spectral_synthesis", "cholesky")


class ExpressionField(serializers.Field):
    """An expression string, a number, or {"expr": ..., "parameters": {...}}."""

    def __init__(self, variable="u", **kwargs):
        self.variable = variable
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if not isinstance(data, (str, int, float, dict)) or isinstance(data, bool):
            raise serializers.ValidationError("expected an expression string, a number or {expr, parameters}")
        try:
            return parse_expression(data, variable=self.variable)
        except ConfigError as exc:
            raise serializers.ValidationError(str(exc))

    def to_representation(self, value):
        return value.to_config()


class ExtendedFloatField(serializers.Field):
    """A float that may also be written "inf" or "-inf"."""

    def to_internal_value(self, data):
        if isinstance(data, bool):
            raise serializers.ValidationError("expected a number")
        try:
            value = float(data)
        except (TypeError, ValueError):
            raise serializers.ValidationError(f"expected a number or 'inf', got {data!r}")
        if math.isnan(value):
            raise serializers.ValidationError("NaN is not allowed")
        return value

    def to_representation(self, value):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value


class ComplexField(serializers.Field):
    """A real number or a [real, imag] pair."""

    def to_internal_value(self, data):
        if isinstance(data, (list, tuple)):
            if len(data) != 2:
                raise serializers.ValidationError("complex values are written as [real, imag]")
            try:
                return complex(float(data[0]), float(data[1]))
            except (TypeError, ValueError):
                raise serializers.ValidationError("complex parts must be numbers")
        if isinstance(data, bool) or not isinstance(data, (int, float)):
            raise serializers.ValidationError("expected a number or [real, imag]")
        return float(data)

    def to_representation(self, value):
        value = complex(value)
        return value.real if value.imag == 0 else [value.real, value.imag]


class PairField(serializers.ListField):
    def __init__(self, child=None, **kwargs):
        super().__init__(child=child or serializers.FloatField(), min_length=2, max_length=2, **kwargs)


class MeasureField(serializers.Field):
    """A nested measure payload."""

    def to_internal_value(self, data):
        return build_measure(data)

    def to_representation(self, value):
        return value.to_config()


class TestFunctionField(serializers.Field):
    def to_internal_value(self, data):
        return build_test_function(data)

    def to_representation(self, value):
        return value.to_config()


# -- measures --------------------------------------------------------------


class DensitySerializer(serializers.Serializer):
    density = ExpressionField()
    support = serializers.ListField(child=ExtendedFloatField(), min_length=2, max_length=2,
                                    default=lambda: [-math.inf, math.inf])
    decay_exponent = serializers.FloatField(required=False, allow_null=True, default=None)
    singularities = serializers.ListField(child=PairField(), default=list)
    label = serializers.CharField(required=False, allow_blank=True, default="")
    shift = serializers.FloatField(default=0.0)

    def validate_support(self, value):
        if not value[0] < value[1]:
            raise serializers.ValidationError("support must be an increasing pair")
        return value

    def create(self, validated_data):
        return measures.DensityMeasure(
            density=validated_data["density"],
            support_interval=tuple(validated_data["support"]),
            decay_exponent=validated_data["decay_exponent"],
            singularities=tuple(tuple(pair) for pair in validated_data["singularities"]),
            label=validated_data["label"],
            shift=validated_data["shift"],
        )


class LebesgueSerializer(serializers.Serializer):
    support = serializers.ListField(child=ExtendedFloatField(), min_length=2, max_length=2,
                                    default=lambda: [-math.inf, math.inf])

    def create(self, validated_data):
        return measures.lebesgue(tuple(validated_data["support"]))


class AtomicSerializer(serializers.Serializer):
    atoms = serializers.ListField(child=PairField())

    def validate_atoms(self, value):
        if any(w < 0 for _, w in value):
            raise serializers.ValidationError("atom weights must be nonnegative")
        return value

    def create(self, validated_data):
        return measures.AtomicMeasure.from_table(validated_data["atoms"])


class LatticeSerializer(serializers.Serializer):
    spacing = serializers.FloatField(default=1.0)
    weight = ExpressionField(variable="n", default=lambda: parse_expression("1", variable="n"))
    origin = serializers.FloatField(default=0.0)
    weight_growth = serializers.FloatField(required=False, allow_null=True, default=None)
    exclude = serializers.ListField(child=serializers.IntegerField(), default=list)

    def validate_spacing(self, value):
        if not value > 0:
            raise serializers.ValidationError("spacing must be positive")
        return value

    def create(self, validated_data):
        return measures.LatticeMeasure(
            spacing=validated_data["spacing"],
            weight=validated_data["weight"],
            origin=validated_data["origin"],
            weight_growth=validated_data["weight_growth"],
            excluded=tuple(validated_data["exclude"]),
        )


class SelfSimilarSerializer(serializers.Serializer):
    ratios = serializers.ListField(child=serializers.FloatField(), min_length=1)
    offsets = serializers.ListField(child=serializers.FloatField(), min_length=1)
    probabilities = serializers.ListField(child=serializers.FloatField(), min_length=1)
    mass = serializers.FloatField(default=1.0, min_value=0.0)
    depth = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=1)

    def validate(self, attrs):
        if not len(attrs["ratios"]) == len(attrs["offsets"]) == len(attrs["probabilities"]):
            raise serializers.ValidationError("ratios, offsets and probabilities must have equal length")
        return attrs

    def create(self, validated_data):
        return measures.SelfSimilarMeasure(
            ratios=tuple(validated_data["ratios"]),
            offsets=tuple(validated_data["offsets"]),
            probabilities=tuple(validated_data["probabilities"]),
            mass=validated_data["mass"],
            depth=validated_data["depth"],
        )


class CantorSerializer(serializers.Serializer):
    mass = serializers.FloatField(default=1.0, min_value=0.0)

    def create(self, validated_data):
        cantor = measures.cantor_measure()
        if validated_data["mass"] == 1.0:
            return cantor
        return replace(cantor, mass=validated_data["mass"])


class ComponentSerializer(serializers.Serializer):
    coefficient = serializers.FloatField(min_value=0.0)
    measure = MeasureField()


class MixtureSerializer(serializers.Serializer):
    components = ComponentSerializer(many=True)

    def create(self, validated_data):
        return measures.MixtureMeasure(tuple((c["coefficient"], c["measure"]) for c in validated_data["components"]))


class ShiftedSerializer(serializers.Serializer):
    base = MeasureField()
    offset = serializers.FloatField()

    def create(self, validated_data):
        return measures.ShiftedMeasure(validated_data["base"], validated_data["offset"])


class ConvolutionSerializer(serializers.Serializer):
    factors = serializers.ListField(child=MeasureField(), min_length=2, max_length=2)

    def create(self, validated_data):
        first, second = validated_data["factors"]
        return measures.convolve(first, second)


class FbmSerializer(serializers.Serializer):
    hurst = serializers.FloatField()

    def validate_hurst(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError("Hurst index must lie in (0, 1)")
        return value

    def create(self, validated_data):
        return measures.fbm_density(validated_data["hurst"])


MEASURE_SERIALIZERS = {
    "density": DensitySerializer,
    "lebesgue": LebesgueSerializer,
    "atomic": AtomicSerializer,
    "lattice": LatticeSerializer,
    "dirac_comb": LatticeSerializer,
    "ifs": SelfSimilarSerializer,
    "cantor": CantorSerializer,
    "mixture": MixtureSerializer,
    "shifted": ShiftedSerializer,
    "convolution": ConvolutionSerializer,
    "fbm": FbmSerializer,
}


def _dispatch(data, key, registry, what):
    if not isinstance(data, dict):
        raise serializers.ValidationError({what: f"expected an object, got {type(data).__name__}"})
    choice = data.get(key)
    if choice not in registry:
        raise serializers.ValidationError({key: f"unknown {what} {key} {choice!r}; expected one of {sorted(registry)}"})
    payload = {k: v for k, v in data.items() if k != key}
    serializer = registry[choice](data=payload)
    serializer.is_valid(raise_exception=True)
    return serializer


def build_measure(data):
    """Validate a measure payload and build the measure."""
    return _dispatch(data, "kind", MEASURE_SERIALIZERS, "measure").save()


# -- test functions --------------------------------------------------------


class GaussianPacketSerializer(serializers.Serializer):
    center = serializers.FloatField(default=0.0)
    width = serializers.FloatField(default=1.0)
    frequency = serializers.FloatField(default=0.0)
    amplitude = ComplexField(default=1.0)

    def validate_width(self, value):
        if not value > 0:
            raise serializers.ValidationError("width must be positive")
        return value

    def create(self, validated_data):
        return testfn.GaussianPacket(**validated_data)


class HermiteSerializer(serializers.Serializer):
    coefficients = serializers.ListField(child=ComplexField(), min_length=1)
    shift = serializers.FloatField(default=0.0)

    def create(self, validated_data):
        return testfn.HermiteExpansion(tuple(validated_data["coefficients"]), validated_data["shift"])


class FourierSideSerializer(serializers.Serializer):
    spectrum = ExpressionField()
    shift = serializers.FloatField(default=0.0)
    factor = ComplexField(default=1.0)
    real_valued = serializers.BooleanField(default=False)
    bandwidth = PairField(required=False, allow_null=True, default=None)

    def create(self, validated_data):
        band = validated_data["bandwidth"]
        return testfn.FourierSide(validated_data["spectrum"], validated_data["shift"], validated_data["factor"],
                                  validated_data["real_valued"], None if band is None else tuple(band))


class TermSerializer(serializers.Serializer):
    coefficient = ComplexField(default=1.0)
    function = TestFunctionField()


class CombinationSerializer(serializers.Serializer):
    terms = TermSerializer(many=True)

    def create(self, validated_data):
        return testfn.Combination(tuple((t["coefficient"], t["function"]) for t in validated_data["terms"])).simplified()


TESTFN_SERIALIZERS = {
    "gaussian_packet": GaussianPacketSerializer,
    "hermite": HermiteSerializer,
    "fourier_side": FourierSideSerializer,
    "combination": CombinationSerializer,
}


def build_test_function(data):
    """Validate a test function payload and build the test function."""
    return _dispatch(data, "form", TESTFN_SERIALIZERS, "test function").save()


# -- sigma-functions and run sidecars --------------------------------------


class SigmaFunctionSerializer(serializers.Serializer):
    """{"f": expression in u} or {"table": [[location, value], ...]}, plus the measure."""

    f = ExpressionField(required=False)
    table = serializers.ListField(child=serializers.ListField(child=ComplexField(), min_length=2, max_length=2),
                                  required=False)
    measure = MeasureField()

    def validate(self, attrs):
        if ("f" in attrs) == ("table" in attrs):
            raise serializers.ValidationError("give exactly one of 'f' and 'table'")
        return attrs

    def create(self, validated_data):
        if "table" in validated_data:
            f = {complex(x).real: v for x, v in validated_data["table"]}
        else:
            f = validated_data["f"]
        return SigmaFunction(f, validated_data["measure"])


class GridSerializer(serializers.Serializer):
    u_max = serializers.FloatField()
    bins = serializers.IntegerField(min_value=2)
    rule = serializers.ChoiceField(choices=("equal_width", "equal_mass"))
    p = serializers.IntegerField(min_value=0)
    truncation_mass = serializers.FloatField()
    moment = serializers.FloatField()
    symmetrized = serializers.BooleanField(default=False)


class RunConfigSerializer(serializers.Serializer):
    """The sidecar written next to every artifact; it reloads as a run description."""

    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1)
    method = serializers.ChoiceField(choices=METHODS, required=False)
    measure = MeasureField(required=False)
    times = serializers.ListField(child=serializers.FloatField(), required=False)
    paths = serializers.IntegerField(min_value=0, required=False)
    grid = GridSerializer(required=False, allow_null=True)
    truncation_mass = serializers.FloatField(required=False)
    symmetrized = serializers.BooleanField(required=False)
    version = serializers.CharField(required=False)
