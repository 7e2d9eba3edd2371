"""Co-sparse analysis model: thresholding pursuit, dictionary metrics and success bounds."""

from .bounds import (
    BoundCurve,
    BoundPoint,
    Variant,
    averaged_bound_joint,
    averaged_bound_marginal,
    bound_curve,
    g_base,
    optimize_beta,
    q_tail,
    theorem1_bound,
    theorem2_bound,
)
from .dictionary import AnalysisDictionary, Family, from_matrix, load_dictionary, make_dif, make_family, make_mix, make_rand, save_dictionary
from .errors import BudgetExceeded, ConfigurationError, CosparseError, DegenerateSignal, InfeasibleTarget, InvalidArgument, InvalidInput
from .linalg import GramSchmidt, OrthoBasis, gs_insert, nullspace_projector, rank_of
from .metrics import (
    DictionaryProfile,
    Mode,
    build_profile,
    enumerate_cosupports,
    joint_distribution,
    ropp_alpha_lambda,
    ropp_constant,
    signature,
)
from .pursuit import (
    PursuitResult,
    adversarial_condition,
    isnr,
    lemma1_condition,
    oracle_denoise,
    success_certificate,
    threshold_pursuit,
)
from .signal import CoSupport, CosparseSignal, NoisyInstance, add_noise, draw_cosupport, generate_signal, ratio_of_snr, snr_of_ratio

__version__ = "0.1.0"
