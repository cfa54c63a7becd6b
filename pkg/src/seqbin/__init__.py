"""Streaming lossless source coding with decoder side information.

Sequential random binning on a time-varying tree code, decoded by a biased
stack algorithm; also the joint source-channel variant over a DMC.
"""

from .exponents import (
    UNBOUNDED,
    BiasInterval,
    ExponentReport,
    bias_cap_error_jsc,
    bias_cap_error_si,
    bias_range_comp_jsc,
    bias_range_comp_si,
    default_bias,
    e0,
    e_s,
    e_si,
    f_ch,
    f_s,
    f_si,
    g_ch,
    g_s,
    g_si,
    pareto_root,
    random_coding_exponent_jsc,
    random_coding_exponent_si,
)
from .models import Channel, JointSource, conditional_entropy, mutual_information
from .treecode import TreeCode

__version__ = "0.1.0"
