#pragma once

#include <memory>
#include <vector>

#include "enskit/rng.hpp"
#include "enskit/tensor.hpp"

namespace enskit {

/// View of one trainable tensor plus its gradient buffer. `lr_scale`
/// multiplies the optimizer's final step size for this tensor only.
struct ParamRef {
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
    double lr_scale = 1.0;
};

/// One differentiable stage. forward() caches whatever backward() needs;
/// backward() accumulates parameter gradients and returns the input gradient.
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor forward(const Tensor& input) = 0;
    virtual Tensor backward(const Tensor& grad_output) = 0;
    virtual void collect_params(std::vector<ParamRef>& out) = 0;
    virtual void init(Rng& rng) = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;
};

/// Affine map y = x W + b with W [m x n], b [n].
class DenseLayer : public Layer {
public:
    DenseLayer(std::size_t input_dim, std::size_t output_dim);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    void collect_params(std::vector<ParamRef>& out) override;
    void init(Rng& rng) override;
    std::unique_ptr<Layer> clone() const override;

    std::size_t input_dim() const { return weight.extent(0); }
    std::size_t output_dim() const { return weight.extent(1); }

    Tensor weight;
    Tensor bias;
    Tensor grad_weight;
    Tensor grad_bias;

private:
    Tensor cached_input_;
};

enum class Activation {
    ReLU,
    Tanh,
};

class ActivationLayer : public Layer {
public:
    explicit ActivationLayer(Activation kind) : kind_(kind) {}

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    void collect_params(std::vector<ParamRef>&) override {}
    void init(Rng&) override {}
    std::unique_ptr<Layer> clone() const override;

    Activation kind() const { return kind_; }

private:
    Activation kind_;
    Tensor cached_input_;
};

} // namespace enskit
