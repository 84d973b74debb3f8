"""Conformal label and concept sets for concept-based classifiers, jointly revised
against prior knowledge so the two sides stay logically consistent."""

__version__ = "0.1.0"

from .conformal import QuantileCalibration, calibrate_quantile, label_set, per_concept_set, product_concept_set, score
from .evalues import BudgetSelection, EValueCalibration, budget_select, evalue_concept_set, evalue_label_set, soft_rank_evalue
from .fuzzy import fuzzy_satisfaction
from .knowledge import (
    ActiveCount,
    AttributeRules,
    DigitSum,
    ExplicitTable,
    KnowledgeTable,
    MajorityVote,
    Rule,
    SumParity,
    abduce,
    cifar_attribute_rules,
    compile_program,
    deduce,
    deduce_image,
    estimate_deltas,
    marginal_label_distribution,
)
from .metrics import EvaluationReport, theoretical_bounds
from .records import ExampleRecord, FactorizedConceptDistribution, RecordBatch
from .revision import PredictionSets, apply_method, oracle_largest_consistent_pair, revise
from .sets import ConceptSet, ConceptSpace, LabelSpace, ProductSet
from .synthio import PredictorSpec, generate, ingest

__all__ = [
    "abduce",
    "ActiveCount",
    "apply_method",
    "AttributeRules",
    "budget_select",
    "BudgetSelection",
    "calibrate_quantile",
    "cifar_attribute_rules",
    "compile_program",
    "ConceptSet",
    "ConceptSpace",
    "deduce",
    "deduce_image",
    "DigitSum",
    "estimate_deltas",
    "EvaluationReport",
    "evalue_concept_set",
    "evalue_label_set",
    "EValueCalibration",
    "ExampleRecord",
    "ExplicitTable",
    "FactorizedConceptDistribution",
    "fuzzy_satisfaction",
    "generate",
    "ingest",
    "KnowledgeTable",
    "label_set",
    "LabelSpace",
    "MajorityVote",
    "marginal_label_distribution",
    "oracle_largest_consistent_pair",
    "per_concept_set",
    "PredictionSets",
    "PredictorSpec",
    "product_concept_set",
    "ProductSet",
    "QuantileCalibration",
    "RecordBatch",
    "revise",
    "Rule",
    "score",
    "soft_rank_evalue",
    "SumParity",
    "theoretical_bounds",
]
