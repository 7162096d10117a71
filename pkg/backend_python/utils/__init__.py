# Utilities package: errors, LLR helpers, numeric kernels
