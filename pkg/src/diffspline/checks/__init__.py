from .algebra import CoadjointDualityCheck, DualityCheck, MetricCompatibilityCheck
from .flows import ConservationCheck, GronwallCheck, TransportCheck
from .optimization import GradientCheck, HypothesisCheck
