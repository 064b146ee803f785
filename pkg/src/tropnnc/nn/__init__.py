from tropnnc.nn.layers import AvgPool, BatchNorm, Conv2d, Flatten, Linear, MaxPool, Network, ReLU, forward
from tropnnc.nn.tnnc import load_model, save_model
from tropnnc.nn.transforms import (
    count_flops,
    count_params,
    flatten_conv_in,
    flatten_conv_out,
    fuse_batchnorm,
    unflatten_conv_in,
    unflatten_conv_out,
)
