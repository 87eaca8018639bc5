#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpmgan/rng.hpp"
#include "mpmgan/tensor.hpp"

namespace mpmgan {

enum class Activation { identity, leaky_relu, tanh, sigmoid };

const char* activation_name(Activation a);

struct DenseLayer {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]
    Activation act = Activation::identity;
    double leaky_slope = 0.2;
};

// Plain MLP over the autodiff engine. Parameters are leaf tensors that
// persist across tapes; forward() records on the active tape when there is one.
class Mlp {
  public:
    Mlp() = default;
    Mlp(std::string name, const std::vector<int>& layer_dims,
        const std::vector<Activation>& activations, Rng& rng);

    Tensor forward(const Tensor& input) const;
    // Composition of the first `n_layers` layers (activations included).
    Tensor forward_upto(const Tensor& input, size_t n_layers) const;

    std::vector<Tensor> params() const;  // weight, bias per layer, in order
    int64_t param_count() const;
    int in_dim() const { return layers_.front().weight.shape()[0]; }
    int out_dim() const { return layers_.back().weight.shape()[1]; }
    size_t layer_count() const { return layers_.size(); }

    const std::string& name() const { return name_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

  private:
    std::string name_;
    std::vector<DenseLayer> layers_;
};

// Weights ~ Normal(0, 2/(in+out)) from the seeded stream, biases zero.
Mlp init_mlp(const std::vector<int>& layer_dims, const std::vector<Activation>& activations,
             uint64_t seed);

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const AdamConfig&) const = default;
};

// Standard Adam with bias correction. step() consumes and zeroes the grads.
class Adam {
  public:
    Adam() = default;
    Adam(AdamConfig cfg, const std::vector<Tensor>& params);

    void step(const std::vector<Tensor>& params);

    int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }
    std::vector<std::vector<double>>& first_moments() { return m_; }
    std::vector<std::vector<double>>& second_moments() { return v_; }
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }
    void restore(int64_t t, std::vector<std::vector<double>> m,
                 std::vector<std::vector<double>> v);

  private:
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

void zero_grads(const std::vector<Tensor>& params);

}  // namespace mpmgan
