#include "nire/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace nire {

namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + to_string(shape));
    n *= d;
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

const char* to_string(DType dtype) { return dtype == DType::f32 ? "float32" : "float64"; }

Buffer make_buffer(DType dtype, std::size_t n, double fill) {
  if (dtype == DType::f32) return std::vector<float>(n, static_cast<float>(fill));
  return std::vector<double>(n, fill);
}

TensorImpl& Tensor::impl() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return *impl_;
}

Tensor Tensor::full(const Shape& shape, double value, DType dtype) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->dtype = dtype;
  impl->data = make_buffer(dtype, static_cast<std::size_t>(nire::numel(shape)), value);
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(const Shape& shape, DType dtype) { return full(shape, 0.0, dtype); }
Tensor Tensor::ones(const Shape& shape, DType dtype) { return full(shape, 1.0, dtype); }
Tensor Tensor::scalar(double value, DType dtype) { return full({}, value, dtype); }

Tensor Tensor::from_values(const Shape& shape, std::span<const double> values, DType dtype) {
  if (static_cast<std::int64_t>(values.size()) != nire::numel(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     to_string(shape));
  }
  Tensor t = zeros(shape, dtype);
  dispatch(dtype, [&]<class T>() {
    auto out = t.mutable_data<T>();
    std::transform(values.begin(), values.end(), out.begin(),
                   [](double v) { return static_cast<T>(v); });
  });
  return t;
}

Tensor Tensor::from_values(const Shape& shape, std::initializer_list<double> values, DType dtype) {
  return from_values(shape, std::span<const double>(values.begin(), values.size()), dtype);
}

Tensor Tensor::from_buffer(const Shape& shape, Buffer data) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->dtype = std::holds_alternative<std::vector<float>>(data) ? DType::f32 : DType::f64;
  const auto n = std::visit([](const auto& v) { return v.size(); }, data);
  if (static_cast<std::int64_t>(n) != nire::numel(shape)) {
    throw ShapeError("buffer size does not match shape " + to_string(shape));
  }
  impl->data = std::move(data);
  return Tensor(std::move(impl));
}

Tensor Tensor::randn(const Shape& shape, std::mt19937_64& rng, double stddev, DType dtype) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(static_cast<std::size_t>(nire::numel(shape)));
  for (auto& x : v) x = dist(rng);
  return from_values(shape, v, dtype);
}

Tensor Tensor::uniform(const Shape& shape, std::mt19937_64& rng, double lo, double hi,
                       DType dtype) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(nire::numel(shape)));
  for (auto& x : v) x = dist(rng);
  return from_values(shape, v, dtype);
}

std::int64_t Tensor::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw IndexError("axis out of range for " + to_string(shape()));
  return impl().shape[static_cast<std::size_t>(axis)];
}

Tensor& Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
  impl().requires_grad = flag;
  return *this;
}

Tensor Tensor::grad() const {
  if (!impl().grad) return zeros(shape(), dtype());
  return from_buffer(shape(), *impl().grad);
}

void Tensor::zero_grad() { impl().grad.reset(); }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return at(0);
}

double Tensor::at(std::int64_t i) const {
  if (i < 0 || i >= numel()) throw IndexError("flat index out of range");
  return dispatch(dtype(), [&]<class T>() { return static_cast<double>(data<T>()[i]); });
}

std::vector<double> Tensor::to_vector() const {
  return dispatch(dtype(), [&]<class T>() {
    auto d = data<T>();
    return std::vector<double>(d.begin(), d.end());
  });
}

Tensor Tensor::astype(DType target) const {
  auto v = to_vector();
  return from_values(shape(), v, target);
}

Tensor Tensor::detach() const { return from_buffer(shape(), impl().data); }
Tensor Tensor::clone() const { return detach(); }

void Tensor::backward() const { nire::backward(*this); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  if (!loss.requires_grad()) throw ContractError("backward() on a tensor that does not require grad");

  // Iterative post-order DFS gives a topological order over interior nodes.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(loss.impl_ptr().get(), 0);
  visited.insert(loss.impl_ptr().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->node && next < node->node->inputs.size()) {
      TensorImpl* child = node->node->inputs[next++].get();
      if (child->node && child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  std::unordered_map<TensorImpl*, Buffer> pending;
  pending.emplace(loss.impl_ptr().get(), make_buffer(loss.dtype(), 1, 1.0));

  std::vector<Buffer*> slots;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* out = *it;
    auto found = pending.find(out);
    if (found == pending.end()) continue;
    const Buffer grad_out = std::move(found->second);
    pending.erase(found);

    auto& node = *out->node;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      TensorImpl* in = node.inputs[i].get();
      if (!in->requires_grad) continue;
      const auto n = static_cast<std::size_t>(nire::numel(in->shape));
      if (in->node) {
        auto [pos, inserted] = pending.try_emplace(in);
        if (inserted) pos->second = make_buffer(in->dtype, n);
        slots[i] = &pos->second;
      } else {
        if (!in->grad) in->grad = make_buffer(in->dtype, n);
        slots[i] = &*in->grad;
      }
    }
    node.backward(*out, grad_out, slots);
  }
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.dtype() != b.dtype()) return false;
  return dispatch(a.dtype(), [&]<class T>() {
    auto x = a.data<T>();
    auto y = b.data<T>();
    return std::memcmp(x.data(), y.data(), x.size_bytes()) == 0;
  });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_abs_diff on mismatched shapes");
  auto x = a.to_vector();
  auto y = b.to_vector();
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

}  // namespace nire
