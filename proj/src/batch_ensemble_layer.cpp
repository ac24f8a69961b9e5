#include "enskit/batch_ensemble_layer.hpp"

#include <cmath>

#include "enskit/common.hpp"

namespace enskit {

BatchEnsembleDense::BatchEnsembleDense(std::size_t input_dim, std::size_t output_dim,
                                       std::size_t members, double fast_lr_scale)
    : slow_weight({input_dim, output_dim}),
      fast_r({members, input_dim}),
      fast_s({members, output_dim}),
      bias({members, output_dim}),
      grad_slow_weight({input_dim, output_dim}),
      grad_fast_r({members, input_dim}),
      grad_fast_s({members, output_dim}),
      grad_bias({members, output_dim}),
      fast_lr_scale_(fast_lr_scale) {
    ENSKIT_THROW_IF(input_dim == 0 || output_dim == 0, ValidationError,
                    "batch-ensemble layer dimensions must be positive");
    ENSKIT_THROW_IF(members == 0, ValidationError, "batch-ensemble layer needs members >= 1");
    ENSKIT_THROW_IF(!(fast_lr_scale > 0.0 && fast_lr_scale <= 1.0), ValidationError,
                    "fast-weight lr multiplier must be in (0, 1], got " << fast_lr_scale);
}

Tensor BatchEnsembleDense::forward(const Tensor& input) {
    const std::size_t m = input_dim(), n = output_dim(), M = members();
    ENSKIT_THROW_IF(input.rank() != 2 || input.extent(1) != m, DimensionError,
                    "batch-ensemble layer expects [M*B x " << m << "] input, got "
                                                           << input.shape_string());
    ENSKIT_THROW_IF(input.extent(0) % M != 0, DimensionError,
                    "tiled batch of " << input.extent(0) << " rows is not divisible by M = "
                                      << M);
    const std::size_t per_member = input.extent(0) / M;
    cached_input_ = input;

    Tensor scaled = input;
    for (std::size_t i = 0; i < M; ++i) {
        const double* r = fast_r.data() + i * m;
        for (std::size_t b = 0; b < per_member; ++b) {
            double* row = scaled.data() + (i * per_member + b) * m;
            for (std::size_t k = 0; k < m; ++k) row[k] *= r[k];
        }
    }
    cached_scaled_input_ = scaled;

    Tensor out = matmul(scaled, slow_weight);
    cached_pre_scale_ = out;
    for (std::size_t i = 0; i < M; ++i) {
        const double* s = fast_s.data() + i * n;
        for (std::size_t b = 0; b < per_member; ++b) {
            double* row = out.data() + (i * per_member + b) * n;
            for (std::size_t j = 0; j < n; ++j) row[j] *= s[j];
        }
    }
    for (std::size_t i = 0; i < M; ++i) {
        const double* brow = bias.data() + i * n;
        for (std::size_t b = 0; b < per_member; ++b) {
            double* row = out.data() + (i * per_member + b) * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += brow[j];
        }
    }
    return out;
}

Tensor BatchEnsembleDense::backward(const Tensor& grad_output) {
    const std::size_t m = input_dim(), n = output_dim(), M = members();
    ENSKIT_THROW_IF(grad_output.rank() != 2 || grad_output.extent(1) != n
                        || grad_output.extent(0) != cached_input_.extent(0),
                    DimensionError,
                    "batch-ensemble backward got gradient shape " << grad_output.shape_string());
    const std::size_t per_member = grad_output.extent(0) / M;

    Tensor grad_z = grad_output;
    for (std::size_t i = 0; i < M; ++i) {
        const double* s = fast_s.data() + i * n;
        double* gs = grad_fast_s.data() + i * n;
        double* gb = grad_bias.data() + i * n;
        for (std::size_t b = 0; b < per_member; ++b) {
            const std::size_t row_idx = i * per_member + b;
            const double* gy = grad_output.data() + row_idx * n;
            const double* z = cached_pre_scale_.data() + row_idx * n;
            double* gz = grad_z.data() + row_idx * n;
            for (std::size_t j = 0; j < n; ++j) {
                gb[j] += gy[j];
                gs[j] += gy[j] * z[j];
                gz[j] = gy[j] * s[j];
            }
        }
    }

    matmul_transpose_a_into(cached_scaled_input_, grad_z, grad_slow_weight);
    Tensor grad_scaled = matmul_transpose_b(grad_z, slow_weight);

    Tensor grad_input = grad_scaled;
    for (std::size_t i = 0; i < M; ++i) {
        const double* r = fast_r.data() + i * m;
        double* gr = grad_fast_r.data() + i * m;
        for (std::size_t b = 0; b < per_member; ++b) {
            const std::size_t row_idx = i * per_member + b;
            const double* gu = grad_scaled.data() + row_idx * m;
            const double* x = cached_input_.data() + row_idx * m;
            double* gx = grad_input.data() + row_idx * m;
            for (std::size_t k = 0; k < m; ++k) {
                gr[k] += gu[k] * x[k];
                gx[k] = gu[k] * r[k];
            }
        }
    }
    return grad_input;
}

void BatchEnsembleDense::collect_params(std::vector<ParamRef>& out) {
    out.push_back({&slow_weight, &grad_slow_weight, 1.0});
    out.push_back({&fast_r, &grad_fast_r, fast_lr_scale_});
    out.push_back({&fast_s, &grad_fast_s, fast_lr_scale_});
    out.push_back({&bias, &grad_bias, 1.0});
}

void BatchEnsembleDense::init(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(input_dim()));
    for (std::size_t i = 0; i < slow_weight.size(); ++i) {
        slow_weight[i] = rng.uniform(-limit, limit);
    }
    for (std::size_t i = 0; i < fast_r.size(); ++i) fast_r[i] = rng.sign();
    for (std::size_t i = 0; i < fast_s.size(); ++i) fast_s[i] = rng.sign();
    bias.fill(0.0);
}

std::unique_ptr<Layer> BatchEnsembleDense::clone() const {
    auto copy = std::make_unique<BatchEnsembleDense>(input_dim(), output_dim(), members(),
                                                     fast_lr_scale_);
    copy->slow_weight = slow_weight;
    copy->fast_r = fast_r;
    copy->fast_s = fast_s;
    copy->bias = bias;
    return copy;
}

Tensor BatchEnsembleDense::member_weight(std::size_t i) const {
    ENSKIT_THROW_IF(i >= members(), IndexError,
                    "member " << i << " out of range for M = " << members());
    const std::size_t m = input_dim(), n = output_dim();
    Tensor w({m, n});
    const double* r = fast_r.data() + i * m;
    const double* s = fast_s.data() + i * n;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            w(a, b) = slow_weight(a, b) * (r[a] * s[b]);
        }
    }
    return w;
}

} // namespace enskit
