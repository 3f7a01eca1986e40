#include "dcmn/tensor.hpp"

#include <cmath>
#include <numeric>

namespace dcmn {

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 2)
    throw ShapeError("tensor rank must be 1 or 2, got shape " + to_string(shape));
  for (auto d : shape)
    if (d == 0) throw ShapeError("zero extent in shape " + to_string(shape));
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_size(shape_))
    throw ShapeError("shape " + to_string(shape_) + " needs " +
                     std::to_string(shape_size(shape_)) + " values, got " +
                     std::to_string(data_.size()));
}

Tensor Tensor::vector(std::vector<double> v) {
  Shape s{v.size()};
  return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(shape_));
  return shape_[axis];
}

void Tensor::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (on)
    grad_.assign(data_.size(), 0.0);
  else
    grad_.clear();
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return Tensor::vector(std::vector<double>(data_.begin() + r * c,
                                            data_.begin() + (r + 1) * c));
}

std::vector<Tensor> split(const Tensor& t, std::span<const std::size_t> extents,
                          std::size_t axis) {
  if (axis >= t.rank()) throw ShapeError("split axis out of range");
  const std::size_t total = std::accumulate(extents.begin(), extents.end(), std::size_t{0});
  if (total != t.dim(axis))
    throw ShapeError("split extents sum to " + std::to_string(total) + " but axis has " +
                     std::to_string(t.dim(axis)));
  std::vector<Tensor> out;
  const std::size_t outer = axis == 0 ? 1 : t.dim(0);
  const std::size_t inner = t.rank() == 2 && axis == 0 ? t.cols() : 1;
  std::size_t offset = 0;
  for (auto e : extents) {
    Shape s = t.shape();
    s[axis] = e;
    Tensor piece(s);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t k = 0; k < e * inner; ++k)
        piece[o * e * inner + k] = t[o * t.dim(axis) * inner + offset * inner + k];
    offset += e;
    out.push_back(std::move(piece));
  }
  return out;
}

}  // namespace dcmn
