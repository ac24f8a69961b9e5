#include "enskit/network.hpp"

#include <algorithm>

#include "enskit/batch_ensemble_layer.hpp"
#include "enskit/common.hpp"

namespace enskit {

void ModelSpec::validate() const {
    ENSKIT_THROW_IF(input_dim == 0, ValidationError, "model needs input_dim >= 1");
    ENSKIT_THROW_IF(num_classes < 2, ValidationError,
                    "model needs num_classes >= 2, got " << num_classes);
    for (std::size_t width : hidden) {
        ENSKIT_THROW_IF(width == 0, ValidationError, "hidden layer widths must be positive");
    }
}

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "tanh") return Activation::Tanh;
    throw ValidationError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string activation_name(Activation activation) {
    return activation == Activation::ReLU ? "relu" : "tanh";
}

void Network::append(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
}

Tensor Network::forward(const Tensor& input) {
    ENSKIT_THROW_IF(layers_.empty(), ValidationError, "network has no layers");
    Tensor x = input;
    for (auto& layer : layers_) {
        x = layer->forward(x);
    }
    return x;
}

Tensor Network::backward(const Tensor& grad_output) {
    ENSKIT_THROW_IF(layers_.empty(), ValidationError, "network has no layers");
    Tensor g = grad_output;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        g = (*it)->backward(g);
    }
    return g;
}

std::vector<ParamRef> Network::params() {
    std::vector<ParamRef> refs;
    for (auto& layer : layers_) {
        layer->collect_params(refs);
    }
    return refs;
}

void Network::zero_grads() {
    for (ParamRef& ref : params()) {
        ref.grad->fill(0.0);
    }
}

void Network::init(Rng& rng) {
    for (auto& layer : layers_) {
        layer->init(rng);
    }
}

std::size_t Network::parameter_count() {
    std::size_t total = 0;
    for (ParamRef& ref : params()) {
        total += ref.value->size();
    }
    return total;
}

std::vector<double> Network::parameters_flat() {
    std::vector<double> flat;
    for (ParamRef& ref : params()) {
        flat.insert(flat.end(), ref.value->data(), ref.value->data() + ref.value->size());
    }
    return flat;
}

void Network::set_parameters_flat(const std::vector<double>& flat) {
    std::size_t offset = 0;
    for (ParamRef& ref : params()) {
        ENSKIT_THROW_IF(offset + ref.value->size() > flat.size(), DimensionError,
                        "flat parameter vector too short: " << flat.size() << " values");
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                  flat.begin() + static_cast<std::ptrdiff_t>(offset + ref.value->size()),
                  ref.value->data());
        offset += ref.value->size();
    }
    ENSKIT_THROW_IF(offset != flat.size(), DimensionError,
                    "flat parameter vector has " << flat.size() << " values, network has "
                                                 << offset);
}

Network Network::clone() const {
    Network copy;
    for (const auto& layer : layers_) {
        copy.append(layer->clone());
    }
    return copy;
}

Network build_network(const ModelSpec& spec) {
    spec.validate();
    Network net;
    std::size_t in = spec.input_dim;
    for (std::size_t width : spec.hidden) {
        net.append(std::make_unique<DenseLayer>(in, width));
        net.append(std::make_unique<ActivationLayer>(spec.activation));
        in = width;
    }
    net.append(std::make_unique<DenseLayer>(in, spec.num_classes));
    return net;
}

Network build_batch_ensemble_network(const ModelSpec& spec, std::size_t members,
                                     double fast_lr_multiplier) {
    spec.validate();
    ENSKIT_THROW_IF(members < 2, ValidationError, "batch ensemble needs M >= 2");
    Network net;
    std::size_t in = spec.input_dim;
    for (std::size_t width : spec.hidden) {
        net.append(std::make_unique<BatchEnsembleDense>(in, width, members, fast_lr_multiplier));
        net.append(std::make_unique<ActivationLayer>(spec.activation));
        in = width;
    }
    net.append(
        std::make_unique<BatchEnsembleDense>(in, spec.num_classes, members, fast_lr_multiplier));
    return net;
}

Network build_mimo_network(const ModelSpec& spec, std::size_t members) {
    spec.validate();
    ENSKIT_THROW_IF(members < 2, ValidationError, "MIMO needs M >= 2");
    Network net;
    std::size_t in = spec.input_dim * members;
    for (std::size_t width : spec.hidden) {
        net.append(std::make_unique<DenseLayer>(in, width));
        net.append(std::make_unique<ActivationLayer>(spec.activation));
        in = width;
    }
    net.append(std::make_unique<DenseLayer>(in, spec.num_classes * members));
    return net;
}

} // namespace enskit
