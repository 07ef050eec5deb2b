"""biasforge: factor-isolation benchmarking for visual bias in embodied agents.

The toolkit generates controlled task-instance sets over visual and context
factor spaces, validates batches for perceptual fairness, quantifies
per-factor bias and cross-factor interaction from trial logs, refines
ambiguous instructions against parsed scenes, and ships a planted-bias
simulation harness whose analytic oracle makes every estimator verifiable at
desk scale.
"""

from .colors import categorize_rgb, color_table, hsl_categorizer
from .contexts import (
    EvaluationContext,
    TaskInstance,
    baseline_evaluation_context,
    context_union,
    encode_key,
    factorial_subspace,
    generalization_context_space,
    read_manifest,
    task_subspace,
    variation_subspace,
    write_manifest,
)
from .errors import BiasforgeError
from .factor_space import (
    FactorDimension,
    FactorSpace,
    FactorValue,
    build_space,
    context_baseline,
    load_space,
    save_space,
    visual_baselines,
)
from .fairness import (
    BatchState,
    ScreeningConfig,
    ScriptedAdjudicator,
    human_gate,
    parse_adjudication,
    refinement_loop,
    screen_batch,
)
from .geometry import (
    CameraPose,
    distance_scale_poses,
    euler_perturbations,
    forward,
    look_at_euler,
    orbit_rings,
)
from .metrics import (
    MetricConfig,
    SuccessTable,
    TrialRecord,
    bias_coefficient,
    build_success_table,
    build_success_tables,
    color_category_summary,
    conditional_cv,
    interaction_effect,
    mean_success_rate,
    read_trials,
    write_trials,
)
from .reports import BiasReport, build_report, load_report, render_text, save_report
from .sgl import (
    AmbiguityReport,
    SceneObject,
    detect_ambiguity,
    ground_instruction,
    parse_scene,
    parse_scene_json,
    refine_instruction,
    select_discriminating_attributes,
)
from .simulate import (
    PlantedBiasModel,
    SimRunSpec,
    analytic_metrics,
    analytic_rates,
    simulate_trials,
    success_probability,
)
from .variants import SamplerModule, SceneConfig, build_example_space, expand_variants, instance_id

__version__ = "0.1.0"

__all__ = [
    "AmbiguityReport",
    "BatchState",
    "BiasReport",
    "BiasforgeError",
    "CameraPose",
    "EvaluationContext",
    "FactorDimension",
    "FactorSpace",
    "FactorValue",
    "MetricConfig",
    "PlantedBiasModel",
    "SamplerModule",
    "SceneConfig",
    "SceneObject",
    "ScreeningConfig",
    "ScriptedAdjudicator",
    "SimRunSpec",
    "SuccessTable",
    "TaskInstance",
    "TrialRecord",
    "analytic_metrics",
    "analytic_rates",
    "baseline_evaluation_context",
    "bias_coefficient",
    "build_example_space",
    "build_report",
    "build_space",
    "build_success_table",
    "build_success_tables",
    "categorize_rgb",
    "color_category_summary",
    "color_table",
    "conditional_cv",
    "context_baseline",
    "context_union",
    "detect_ambiguity",
    "distance_scale_poses",
    "encode_key",
    "euler_perturbations",
    "expand_variants",
    "factorial_subspace",
    "forward",
    "generalization_context_space",
    "ground_instruction",
    "hsl_categorizer",
    "human_gate",
    "instance_id",
    "interaction_effect",
    "load_report",
    "load_space",
    "look_at_euler",
    "mean_success_rate",
    "orbit_rings",
    "parse_adjudication",
    "parse_scene",
    "parse_scene_json",
    "read_manifest",
    "read_trials",
    "refine_instruction",
    "refinement_loop",
    "render_text",
    "save_report",
    "save_space",
    "screen_batch",
    "select_discriminating_attributes",
    "simulate_trials",
    "success_probability",
    "task_subspace",
    "variation_subspace",
    "visual_baselines",
    "write_manifest",
    "write_trials",
]
