#include "mpmgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mpmgan {

namespace {

thread_local Tape* g_active_tape = nullptr;

void accumulate(std::vector<double>& dst, const std::vector<double>& src) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

std::vector<double>* grad_target(const std::shared_ptr<TensorNode>& n) {
    if (!n->requires_grad) return nullptr;
    if (n->grad.empty()) n->grad.assign(n->values.size(), 0.0);
    return &n->grad;
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
    std::ostringstream os;
    os << op << ": incompatible shapes " << shape_str(a) << " and " << shape_str(b);
    throw ShapeError(os.str());
}

}  // namespace

int64_t numel_of(const Shape& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor make_op_result(Shape shape, std::vector<double> values, bool requires_grad,
                      const Tape* tape) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    n->tape = tape;
    return Tensor(std::move(n));
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    return from_values(shape, std::vector<double>(numel_of(shape), 0.0), requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value) {
    return from_values(shape, std::vector<double>(numel_of(shape), value), false);
}

Tensor Tensor::from_values(const Shape& shape, std::vector<double> values,
                           bool requires_grad) {
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor: non-positive dimension in " + shape_str(shape));
    }
    if (numel_of(shape) != static_cast<int64_t>(values.size())) {
        throw ShapeError("tensor: " + shape_str(shape) + " does not match value count " +
                         std::to_string(values.size()));
    }
    return make_op_result(shape, std::move(values), requires_grad, nullptr);
}

Tensor Tensor::scalar(double value) { return from_values({1}, {value}, false); }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor " + shape_str(shape()) + " is not scalar");
    return node_->values[0];
}

void Tensor::set_requires_grad(bool v) { node_->requires_grad = v; }

std::vector<double>& Tensor::grad() {
    if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
    return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
    if (node_->grad.empty()) throw DomainError("grad: no gradient present");
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

Tensor Tensor::clone() const {
    return make_op_result(node_->shape, node_->values, node_->requires_grad, nullptr);
}

Tensor Tensor::detach() const {
    return make_op_result(node_->shape, node_->values, false, nullptr);
}

bool Tensor::all_finite() const {
    for (double v : node_->values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

// ---- Tape ------------------------------------------------------------------

Tape* Tape::active() { return g_active_tape; }

Tape::Scope::Scope(Tape& t) : prev_(g_active_tape) { g_active_tape = &t; }
Tape::Scope::~Scope() { g_active_tape = prev_; }

Tape::NoGrad::NoGrad() : prev_(g_active_tape) { g_active_tape = nullptr; }
Tape::NoGrad::~NoGrad() { g_active_tape = prev_; }

void Tape::record(std::shared_ptr<TensorNode> out, std::function<void()> backward) {
    entries_.push_back({std::move(out), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ShapeError("backward: loss " + shape_str(loss.shape()) + " is not scalar");
    }
    if (loss.node()->tape != this) {
        throw DomainError("backward: loss is detached from the tape");
    }
    loss.node()->grad.assign(1, 1.0);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->out->grad.empty()) continue;  // never contributed to the loss
        it->back();
    }
}

void backward(const Tensor& loss) {
    const Tape* t = loss.node()->tape;
    if (t == nullptr) throw DomainError("backward: loss is detached from the tape");
    const_cast<Tape*>(t)->backward(loss);
}

// ---- op helpers ------------------------------------------------------------

namespace {

bool recording(const std::initializer_list<const Tensor*>& operands) {
    if (g_active_tape == nullptr) return false;
    for (const Tensor* t : operands) {
        if ((*t).requires_grad()) return true;
    }
    return false;
}

Tensor finish(Shape shape, std::vector<double> values, bool rec,
              std::function<void(const std::shared_ptr<TensorNode>&)> make_back) {
    Tensor out = make_op_result(std::move(shape), std::move(values), rec,
                                rec ? g_active_tape : nullptr);
    if (rec) make_back(out.node());
    return out;
}

// 0: shapes equal; 1: b broadcast over a's leading axis; else error.
int broadcast_mode(const char* op, const Shape& a, const Shape& b) {
    if (a == b) return 0;
    if (a.size() == b.size() + 1 && std::equal(b.begin(), b.end(), a.begin() + 1)) return 1;
    shape_fail(op, a, b);
}

template <typename Fwd, typename BwdA, typename BwdB>
Tensor elementwise_binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd,
                          BwdA dfda, BwdB dfdb) {
    const int mode = broadcast_mode(op, a.shape(), b.shape());
    const int64_t n = a.numel();
    const int64_t bn = b.numel();
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(n);
    if (mode == 0) {
        for (int64_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i]);
    } else {
        for (int64_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i % bn]);
    }
    const bool rec = recording({&a, &b});
    return finish(a.shape(), std::move(out), rec, [&](const std::shared_ptr<TensorNode>& on) {
        auto an = a.node();
        auto bnode = b.node();
        g_active_tape->record(on, [an, bnode, on, mode, n, bn, dfda, dfdb]() {
            const auto& go = on->grad;
            if (auto* ga = grad_target(an)) {
                for (int64_t i = 0; i < n; ++i) {
                    (*ga)[i] += go[i] * dfda(an->values[i],
                                             bnode->values[mode == 0 ? i : i % bn]);
                }
            }
            if (auto* gb = grad_target(bnode)) {
                for (int64_t i = 0; i < n; ++i) {
                    (*gb)[mode == 0 ? i : i % bn] +=
                        go[i] * dfdb(an->values[i], bnode->values[mode == 0 ? i : i % bn]);
                }
            }
        });
    });
}

template <typename Fwd, typename Bwd>
Tensor elementwise_unary(const Tensor& a, Fwd fwd, Bwd dfdx_from_in_out) {
    const int64_t n = a.numel();
    const auto& av = a.values();
    std::vector<double> out(n);
    for (int64_t i = 0; i < n; ++i) out[i] = fwd(av[i]);
    const bool rec = recording({&a});
    return finish(a.shape(), std::move(out), rec, [&](const std::shared_ptr<TensorNode>& on) {
        auto an = a.node();
        g_active_tape->record(on, [an, on, n, dfdx_from_in_out]() {
            auto* ga = grad_target(an);
            if (!ga) return;
            const auto& go = on->grad;
            for (int64_t i = 0; i < n; ++i) {
                (*ga)[i] += go[i] * dfdx_from_in_out(an->values[i], on->values[i]);
            }
        });
    });
}

}  // namespace

// ---- operations ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
        shape_fail("matmul", a.shape(), b.shape());
    }
    const int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(m * n, 0.0);
    // i-k-j keeps the inner loop contiguous; accumulation over k is ascending
    // for every row, so a batched forward matches per-sample forwards bitwise.
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            const double* brow = &bv[p * n];
            double* crow = &out[i * n];
            for (int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
    const bool rec = recording({&a, &b});
    return finish({static_cast<int>(m), static_cast<int>(n)}, std::move(out), rec,
                  [&](const std::shared_ptr<TensorNode>& on) {
                      auto an = a.node();
                      auto bn = b.node();
                      g_active_tape->record(on, [an, bn, on, m, k, n]() {
                          const auto& go = on->grad;
                          if (auto* ga = grad_target(an)) {
                              // dA = dC * B^T
                              for (int64_t i = 0; i < m; ++i) {
                                  for (int64_t p = 0; p < k; ++p) {
                                      double acc = 0.0;
                                      const double* grow = &go[i * n];
                                      const double* brow = &bn->values[p * n];
                                      for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                                      (*ga)[i * k + p] += acc;
                                  }
                              }
                          }
                          if (auto* gb = grad_target(bn)) {
                              // dB = A^T * dC
                              for (int64_t i = 0; i < m; ++i) {
                                  for (int64_t p = 0; p < k; ++p) {
                                      const double aip = an->values[i * k + p];
                                      const double* grow = &go[i * n];
                                      double* gbrow = &(*gb)[p * n];
                                      for (int64_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                                  }
                              }
                          }
                      });
                  });
}

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor neg(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

namespace {

Tensor reduce_all(const Tensor& a, double scale) {
    const int64_t n = a.numel();
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    std::vector<double> out{acc * scale};
    const bool rec = recording({&a});
    return finish({1}, std::move(out), rec, [&](const std::shared_ptr<TensorNode>& on) {
        auto an = a.node();
        g_active_tape->record(on, [an, on, n, scale]() {
            auto* ga = grad_target(an);
            if (!ga) return;
            const double g = on->grad[0] * scale;
            for (int64_t i = 0; i < n; ++i) (*ga)[i] += g;
        });
    });
}

}  // namespace

Tensor sum(const Tensor& a) { return reduce_all(a, 1.0); }

Tensor mean(const Tensor& a) { return reduce_all(a, 1.0 / static_cast<double>(a.numel())); }

Tensor concat_last_axis(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_last_axis: no operands");
    const Shape& s0 = parts[0].shape();
    int total_last = 0;
    for (const Tensor& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != s0.size() ||
            !std::equal(s.begin(), s.end() - 1, s0.begin(), s0.end() - 1)) {
            shape_fail("concat_last_axis", s0, s);
        }
        total_last += s.back();
    }
    Shape out_shape = s0;
    out_shape.back() = total_last;

    const int64_t rows = numel_of(s0) / s0.back();
    std::vector<double> out(rows * total_last);
    std::vector<int> offsets;
    {
        int off = 0;
        for (const Tensor& p : parts) {
            const int w = p.shape().back();
            const auto& pv = p.values();
            for (int64_t r = 0; r < rows; ++r) {
                std::copy(pv.begin() + r * w, pv.begin() + (r + 1) * w,
                          out.begin() + r * total_last + off);
            }
            offsets.push_back(off);
            off += w;
        }
    }

    std::vector<const Tensor*> refs;
    for (const Tensor& p : parts) refs.push_back(&p);
    bool rec = g_active_tape != nullptr &&
               std::any_of(refs.begin(), refs.end(),
                           [](const Tensor* t) { return t->requires_grad(); });
    return finish(std::move(out_shape), std::move(out), rec,
                  [&](const std::shared_ptr<TensorNode>& on) {
                      std::vector<std::shared_ptr<TensorNode>> nodes;
                      for (const Tensor& p : parts) nodes.push_back(p.node());
                      g_active_tape->record(on, [nodes, on, offsets, rows, total_last]() {
                          const auto& go = on->grad;
                          for (size_t pi = 0; pi < nodes.size(); ++pi) {
                              auto* gp = grad_target(nodes[pi]);
                              if (!gp) continue;
                              const int w = nodes[pi]->shape.back();
                              const int off = offsets[pi];
                              for (int64_t r = 0; r < rows; ++r) {
                                  for (int j = 0; j < w; ++j) {
                                      (*gp)[r * w + j] += go[r * total_last + off + j];
                                  }
                              }
                          }
                      });
                  });
}

Tensor relu(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    return elementwise_unary(
        a, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& a) {
    for (double v : a.values()) {
        if (!(v > 0.0)) {
            throw DomainError("log: non-positive value " + std::to_string(v));
        }
    }
    return elementwise_unary(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor max_with_zero(const Tensor& a) {
    // Same kernel as relu; kept as a named op because it realizes the hinge.
    return elementwise_unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// ---- gradient checking -----------------------------------------------------

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double eps) {
    Tensor x = point.clone();
    x.set_requires_grad(true);
    x.zero_grad();
    std::vector<double> analytic;
    {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = f(x);
        tape.backward(loss);
        analytic = x.grad();
    }
    double max_err = 0.0;
    Tensor probe = point.clone();
    probe.set_requires_grad(false);
    for (int64_t i = 0; i < point.numel(); ++i) {
        const double saved = probe.values()[i];
        Tape::NoGrad ng;
        probe.values()[i] = saved + eps;
        const double fp = f(probe).item();
        probe.values()[i] = saved - eps;
        const double fm = f(probe).item();
        probe.values()[i] = saved;
        const double fd = (fp - fm) / (2.0 * eps);
        const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

double grad_check_params(const std::function<Tensor()>& loss_fn,
                         const std::vector<Tensor>& params, double eps) {
    for (const Tensor& p : params) {
        Tensor q = p;  // handles share storage
        q.zero_grad();
    }
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = loss_fn();
        tape.backward(loss);
        for (const Tensor& p : params) {
            analytic.push_back(p.has_grad() ? p.grad()
                                            : std::vector<double>(p.numel(), 0.0));
        }
    }
    double max_err = 0.0;
    Tape::NoGrad ng;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        for (int64_t i = 0; i < p.numel(); ++i) {
            const double saved = p.values()[i];
            p.values()[i] = saved + eps;
            const double fp = loss_fn().item();
            p.values()[i] = saved - eps;
            const double fm = loss_fn().item();
            p.values()[i] = saved;
            const double fd = (fp - fm) / (2.0 * eps);
            const double err = std::abs(analytic[pi][i] - fd) / std::max(1.0, std::abs(fd));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace mpmgan
