"""Integer codes shared by the kernel backends.

A posterior is handed to the kernels as two small arrays instead of an
object, so the numba twins can compile against plain numerics:

``spec_i`` (int64, length 3)
    [I_PARAM, I_PRED, I_LIK] slots holding one of the family codes below.

``spec_f`` (float64, length 8)
    [sigma, alpha, clip v, confidence T, ndg a, ndg b, 1/T_post, data scale].

``mu_table`` / ``var_table`` (float64, K x K)
    Per-label rows of NDG means and variances; zeros when unused.
"""

# spec_i slots
I_PARAM = 0
I_PRED = 1
I_LIK = 2

# parameter-prior families
PARAM_NONE = 0
PARAM_NORMAL = 1

# prediction-prior families
PRED_NONE = 0
PRED_DIRICHLET = 1
PRED_DIRCLIP = 2
PRED_NDG = 3
PRED_CONFIDENCE = 4

# likelihood families
LIK_NONE = 0
LIK_CATEGORICAL = 1
LIK_NDGQ = 2

# spec_f slots
F_SIGMA = 0
F_ALPHA = 1
F_CLIP = 2
F_CONF_T = 3
F_NDG_A = 4
F_NDG_B = 5
F_INV_TEMP = 6
F_DATA_SCALE = 7

N_SPEC_I = 3
N_SPEC_F = 8
