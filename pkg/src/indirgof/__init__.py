"""Fourier-series estimation of convolution-distorted regression and an
asymptotically distribution-free goodness-of-fit test for the error law."""

from .bandwidth import CvReport, cv_select, default_radius_grid
from .errors import (
    DataFormatError,
    DegenerateFitError,
    EvaluationRangeError,
    IndirgofError,
    InsufficientDataError,
    LatticeCapError,
    QuadratureError,
    SingularMatrixError,
)
from .estimation import (
    Dataset,
    DensityEstimate,
    RegressionFit,
    ecdf_eval,
    estimate_coeffs,
    estimate_density,
    fit,
)
from .khmaladze import (
    GammaProvider,
    ProcessTrace,
    ScanFunction,
    TestReport,
    brownian_sup_quantile,
    brownian_sup_tail,
    build_scan,
    decide,
    gamma_closed_form_gaussian,
    gamma_provider_for,
    gamma_quadrature,
    statistic,
    transform,
    transform_standardized,
)
from .nulls import (
    ErrorSampler,
    NullModel,
    alternative_samplers,
    gaussian_null,
    get_null,
    get_sampler,
    laplace_null,
    score_h,
    student_t_null,
)
from .simulation import (
    PowerTable,
    SyntheticModel,
    generate,
    ktheta_true,
    paper_model,
    power_study,
    sample_g1,
)
from .spectral import (
    FreqLattice,
    SmoothingKernel,
    SpectralCutoffKernel,
    enumerate_lattice,
    smoothing_weight,
    weight_matrix,
)

__version__ = "0.1.0"
