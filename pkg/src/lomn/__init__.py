"""Jump inference for high-frequency prices observed with one-sided noise."""

from .evt import (GumbelCalibration, global_centering, gumbel_cdf, gumbel_quantile,
                  halfnorm_diff_density, halfnorm_diff_survival, local_quantile,
                  balanced_block_count)
from .inference import (GlobalTestReport, JumpEvent, LocalTestReport, estimate_jump,
                        finite_sample_block_count, global_statistic, global_test,
                        local_statistic, local_test, localize_jump, sequential_detect)
from .mmn import (BootstrapConfig, BootstrapHandle, LMConfig, bootstrap_critical_values,
                  bootstrap_statistics, estimate_noise_level, lm_statistic,
                  local_average_detector)
from .online import DetectorConfig, DetectorState, close, detector_new, push, race, run
from .series import (BlockGrid, ExtremaSeries, QuoteSeries, Side, build_block_grid,
                     extrema_window, local_extrema)
from .simulate import (NoiseSpec, ObservationSet, Path, SimConfig, apply_noise, inject_jump,
                       simulate_path, simulate_paths)
from .spot_vol import (PsiInverse, SpotVolConfig, SpotVolPath, Truncation, psi_mc,
                       spot_vol_at, spot_vol_path)

__version__ = "0.1.0"
