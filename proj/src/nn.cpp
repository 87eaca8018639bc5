#include "mpmgan/nn.hpp"

#include <cmath>

#include "mpmgan/errors.hpp"

namespace mpmgan {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

namespace {

Tensor apply_activation(const Tensor& x, Activation act, double slope) {
    switch (act) {
        case Activation::identity: return x;
        case Activation::leaky_relu: return leaky_relu(x, slope);
        case Activation::tanh: return tanh(x);
        case Activation::sigmoid: return sigmoid(x);
    }
    return x;
}

}  // namespace

Mlp::Mlp(std::string name, const std::vector<int>& layer_dims,
         const std::vector<Activation>& activations, Rng& rng)
    : name_(std::move(name)) {
    if (layer_dims.size() < 2) {
        throw ConfigError("mlp " + name_ + ": need at least 2 layer dims, got " +
                          std::to_string(layer_dims.size()));
    }
    for (int d : layer_dims) {
        if (d <= 0) throw ConfigError("mlp " + name_ + ": non-positive layer dim");
    }
    const size_t n_layers = layer_dims.size() - 1;
    if (activations.size() != n_layers) {
        throw ConfigError("mlp " + name_ + ": " + std::to_string(activations.size()) +
                          " activations for " + std::to_string(n_layers) + " layers");
    }
    layers_.reserve(n_layers);
    for (size_t l = 0; l < n_layers; ++l) {
        const int in = layer_dims[l];
        const int out = layer_dims[l + 1];
        const double std_dev = std::sqrt(2.0 / static_cast<double>(in + out));
        std::vector<double> w(static_cast<size_t>(in) * out);
        for (double& x : w) x = std_dev * rng.normal();
        DenseLayer layer;
        layer.weight = Tensor::from_values({in, out}, std::move(w), true);
        layer.bias = Tensor::zeros({out}, true);
        layer.act = activations[l];
        layers_.push_back(std::move(layer));
    }
}

Tensor Mlp::forward(const Tensor& input) const { return forward_upto(input, layers_.size()); }

Tensor Mlp::forward_upto(const Tensor& input, size_t n_layers) const {
    if (input.shape().size() != 2 || input.shape()[1] != in_dim()) {
        throw ShapeError("mlp " + name_ + ": input " + shape_str(input.shape()) +
                         " does not match in_dim " + std::to_string(in_dim()));
    }
    Tensor x = input;
    for (size_t l = 0; l < n_layers; ++l) {
        const DenseLayer& layer = layers_[l];
        x = add(matmul(x, layer.weight), layer.bias);
        x = apply_activation(x, layer.act, layer.leaky_slope);
    }
    return x;
}

std::vector<Tensor> Mlp::params() const {
    std::vector<Tensor> out;
    out.reserve(layers_.size() * 2);
    for (const DenseLayer& l : layers_) {
        out.push_back(l.weight);
        out.push_back(l.bias);
    }
    return out;
}

int64_t Mlp::param_count() const {
    int64_t n = 0;
    for (const DenseLayer& l : layers_) n += l.weight.numel() + l.bias.numel();
    return n;
}

Mlp init_mlp(const std::vector<int>& layer_dims, const std::vector<Activation>& activations,
             uint64_t seed) {
    Rng rng(seed);
    return Mlp("mlp", layer_dims, activations, rng);
}

Adam::Adam(AdamConfig cfg, const std::vector<Tensor>& params) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor& p : params) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void Adam::step(const std::vector<Tensor>& params) {
    if (params.size() != m_.size()) {
        throw DomainError("adam_step: parameter list does not match optimizer state");
    }
    for (const Tensor& p : params) {
        if (!p.has_grad()) {
            throw DomainError("adam_step: missing gradient");
        }
        for (double g : p.grad()) {
            if (!std::isfinite(g)) throw DomainError("adam_step: non-finite gradient");
        }
    }
    t_ += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        auto& vals = p.values();
        auto& grad = p.grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < vals.size(); ++i) {
            const double g = grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            vals[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
            grad[i] = 0.0;
        }
    }
}

void Adam::restore(int64_t t, std::vector<std::vector<double>> m,
                   std::vector<std::vector<double>> v) {
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

void zero_grads(const std::vector<Tensor>& params) {
    for (const Tensor& p : params) {
        Tensor q = p;
        q.zero_grad();
    }
}

}  // namespace mpmgan
