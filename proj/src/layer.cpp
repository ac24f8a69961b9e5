#include "enskit/layer.hpp"

#include <cmath>

#include "enskit/common.hpp"

namespace enskit {

DenseLayer::DenseLayer(std::size_t input_dim, std::size_t output_dim)
    : weight({input_dim, output_dim}),
      bias({output_dim}),
      grad_weight({input_dim, output_dim}),
      grad_bias({output_dim}) {
    ENSKIT_THROW_IF(input_dim == 0 || output_dim == 0, ValidationError,
                    "dense layer dimensions must be positive, got " << input_dim << " -> "
                                                                    << output_dim);
}

Tensor DenseLayer::forward(const Tensor& input) {
    ENSKIT_THROW_IF(input.rank() != 2 || input.extent(1) != input_dim(), DimensionError,
                    "dense layer expects [B x " << input_dim() << "] input, got "
                                                << input.shape_string());
    cached_input_ = input;
    Tensor out = matmul(input, weight);
    add_row_inplace(out, bias);
    return out;
}

Tensor DenseLayer::backward(const Tensor& grad_output) {
    ENSKIT_THROW_IF(grad_output.rank() != 2 || grad_output.extent(1) != output_dim()
                        || grad_output.extent(0) != cached_input_.extent(0),
                    DimensionError,
                    "dense backward got gradient shape " << grad_output.shape_string());
    matmul_transpose_a_into(cached_input_, grad_output, grad_weight);
    const std::size_t batch = grad_output.extent(0), n = output_dim();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = grad_output.data() + b * n;
        for (std::size_t j = 0; j < n; ++j) grad_bias[j] += row[j];
    }
    return matmul_transpose_b(grad_output, weight);
}

void DenseLayer::collect_params(std::vector<ParamRef>& out) {
    out.push_back({&weight, &grad_weight, 1.0});
    out.push_back({&bias, &grad_bias, 1.0});
}

void DenseLayer::init(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(input_dim()));
    for (std::size_t i = 0; i < weight.size(); ++i) weight[i] = rng.uniform(-limit, limit);
    bias.fill(0.0);
}

std::unique_ptr<Layer> DenseLayer::clone() const {
    auto copy = std::make_unique<DenseLayer>(input_dim(), output_dim());
    copy->weight = weight;
    copy->bias = bias;
    return copy;
}

Tensor ActivationLayer::forward(const Tensor& input) {
    cached_input_ = input;
    Tensor out = input;
    if (kind_ == Activation::ReLU) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out[i] < 0.0) out[i] = 0.0;
        }
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    }
    return out;
}

Tensor ActivationLayer::backward(const Tensor& grad_output) {
    ENSKIT_THROW_IF(!grad_output.same_shape(cached_input_), DimensionError,
                    "activation backward got gradient shape " << grad_output.shape_string());
    Tensor grad = grad_output;
    if (kind_ == Activation::ReLU) {
        for (std::size_t i = 0; i < grad.size(); ++i) {
            if (cached_input_[i] <= 0.0) grad[i] = 0.0;
        }
    } else {
        for (std::size_t i = 0; i < grad.size(); ++i) {
            const double t = std::tanh(cached_input_[i]);
            grad[i] *= 1.0 - t * t;
        }
    }
    return grad;
}

std::unique_ptr<Layer> ActivationLayer::clone() const {
    return std::make_unique<ActivationLayer>(kind_);
}

} // namespace enskit
