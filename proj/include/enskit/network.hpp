#pragma once

#include <memory>
#include <string>
#include <vector>

#include "enskit/layer.hpp"

namespace enskit {

/// Architecture description. `input_dim` is the raw feature width of one
/// example; MIMO and batch-ensemble builders derive their own layer widths
/// from it.
struct ModelSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t num_classes = 0;
    Activation activation = Activation::ReLU;

    void validate() const;
};

Activation parse_activation(const std::string& name);
std::string activation_name(Activation activation);

/// Sequential stack of layers with flat parameter access.
class Network {
public:
    Network() = default;

    void append(std::unique_ptr<Layer> layer);

    Tensor forward(const Tensor& input);
    Tensor backward(const Tensor& grad_output);

    std::vector<ParamRef> params();
    void zero_grads();
    void init(Rng& rng);

    std::size_t parameter_count();
    std::vector<double> parameters_flat();
    void set_parameters_flat(const std::vector<double>& flat);

    Network clone() const;

    std::size_t num_layers() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Plain dense net: input_dim -> hidden... -> num_classes, with the chosen
/// activation between affine maps.
Network build_network(const ModelSpec& spec);

/// Same topology with every affine map replaced by a BatchEnsembleDense.
Network build_batch_ensemble_network(const ModelSpec& spec, std::size_t members,
                                     double fast_lr_multiplier);

/// MIMO net: first layer reads M concatenated examples (M * input_dim wide),
/// last layer emits M heads of num_classes logits each.
Network build_mimo_network(const ModelSpec& spec, std::size_t members);

} // namespace enskit
