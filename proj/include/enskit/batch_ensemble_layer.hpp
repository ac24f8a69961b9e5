#pragma once

#include "enskit/layer.hpp"

namespace enskit {

/// Dense layer with a shared slow weight and per-member rank-1 fast weights.
///
/// Member i's effective weight is W ⊙ (r_i s_iᵀ); its bias is row i of `bias`.
/// forward() takes an M-tiled batch [M*B x m] whose row block i belongs to
/// member i, computes ((x ⊙ r_i) W) ⊙ s_i + b_i in one fused pass, and shares
/// the plain-dense matmul kernel so all-ones fast weights reproduce a plain
/// dense layer exactly.
class BatchEnsembleDense : public Layer {
public:
    BatchEnsembleDense(std::size_t input_dim, std::size_t output_dim, std::size_t members,
                       double fast_lr_scale);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output) override;
    void collect_params(std::vector<ParamRef>& out) override;
    void init(Rng& rng) override;
    std::unique_ptr<Layer> clone() const override;

    std::size_t input_dim() const { return slow_weight.extent(0); }
    std::size_t output_dim() const { return slow_weight.extent(1); }
    std::size_t members() const { return fast_r.extent(0); }

    /// W ⊙ (r_i s_iᵀ), materialized.
    Tensor member_weight(std::size_t i) const;

    Tensor slow_weight;
    Tensor fast_r;
    Tensor fast_s;
    Tensor bias;
    Tensor grad_slow_weight;
    Tensor grad_fast_r;
    Tensor grad_fast_s;
    Tensor grad_bias;

private:
    double fast_lr_scale_;
    Tensor cached_input_;
    Tensor cached_scaled_input_;
    Tensor cached_pre_scale_;
};

} // namespace enskit
