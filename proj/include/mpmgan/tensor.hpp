#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mpmgan/errors.hpp"

namespace mpmgan {

using Shape = std::vector<int>;

class Tape;

struct TensorNode {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until a backward pass touches this node
    bool requires_grad = false;
    const Tape* tape = nullptr;  // tape that recorded the producing op, if any
};

int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major f64 tensor handle. Copying the handle shares storage;
// use clone()/detach() for value copies.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double value);
    static Tensor from_values(const Shape& shape, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    int64_t numel() const { return static_cast<int64_t>(node_->values.size()); }

    std::vector<double>& values() { return node_->values; }
    const std::vector<double>& values() const { return node_->values; }
    double item() const;  // scalar tensors only

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v);

    bool has_grad() const { return !node_->grad.empty(); }
    std::vector<double>& grad();             // allocates zeros on first use
    const std::vector<double>& grad() const; // throws when absent
    void zero_grad();                        // allocate-and-clear

    Tensor clone() const;   // deep copy, keeps requires_grad, no tape
    Tensor detach() const;  // deep copy of values, requires_grad = false

    bool all_finite() const;

    std::shared_ptr<TensorNode> node() const { return node_; }

  private:
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<TensorNode> node_;

    friend Tensor make_op_result(Shape shape, std::vector<double> values,
                                 bool requires_grad, const Tape* tape);
};

// Records operations in forward order; backward() replays them strictly in
// reverse, which is a valid topological order because every operand of an
// op was recorded (or is a leaf) before the op itself.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    // RAII: makes `t` the active tape on this thread.
    class Scope {
      public:
        explicit Scope(Tape& t);
        ~Scope();

      private:
        Tape* prev_;
    };

    // RAII: disables recording (inference mode).
    class NoGrad {
      public:
        NoGrad();
        ~NoGrad();

      private:
        Tape* prev_;
    };

    void record(std::shared_ptr<TensorNode> out, std::function<void()> backward);
    void backward(const Tensor& loss);
    size_t size() const { return entries_.size(); }

  private:
    struct Entry {
        std::shared_ptr<TensorNode> out;
        std::function<void()> back;
    };
    std::vector<Entry> entries_;
};

// ---- operations ------------------------------------------------------------
// Elementwise binary ops accept equal shapes, or a second operand whose shape
// equals the first with the leading (batch) axis removed.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar
Tensor concat_last_axis(const std::vector<Tensor>& parts);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);          // domain error on non-positive values
Tensor max_with_zero(const Tensor& a);  // subgradient 0 at the kink

// Backward through the tape that recorded `loss`. Errors when the loss is
// non-scalar or was never recorded.
void backward(const Tensor& loss);

// Max over coordinates of |analytic - central difference| / max(1, |central difference|).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double eps);

// Same check for a scalar loss closed over a set of leaf parameters.
double grad_check_params(const std::function<Tensor()>& loss_fn,
                         const std::vector<Tensor>& params, double eps);

}  // namespace mpmgan
