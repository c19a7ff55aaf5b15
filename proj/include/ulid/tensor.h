// include/ulid/tensor.h

// Copyright 2026  The ulid Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef ULID_TENSOR_H_
#define ULID_TENSOR_H_

#include <cstring>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "ulid/common.h"

namespace ulid {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

// Recycling arena for tensor storage. Activation buffers churn every
// training step at sizes the system allocator maps and unmaps each time;
// the pool hands back cached blocks instead. Returned memory is dirty.
void* pool_alloc(size_t bytes);
void pool_free(void* p, size_t bytes);
size_t pool_cached_bytes();

namespace internal {

template <typename T>
struct PoolDeleter {
  size_t bytes = 0;
  void operator()(T* p) const {
    if (p != nullptr) pool_free(p, bytes);
  }
};

template <typename T>
using PoolBuf = std::unique_ptr<T[], PoolDeleter<T>>;

template <typename T>
PoolBuf<T> pool_buf(int64_t n, bool zero) {
  const size_t bytes = static_cast<size_t>(n) * sizeof(T);
  T* p = static_cast<T*>(pool_alloc(bytes));
  if (zero) std::memset(p, 0, bytes);
  return PoolBuf<T>(p, PoolDeleter<T>{bytes});
}

}  // namespace internal

// Dense row-major n-dimensional array with an optional same-shape gradient
// buffer. float instantiation carries training math; double instantiation
// carries every gradient and oracle test.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(Shape shape, bool zero_init = true) { reset(std::move(shape), zero_init); }

  TensorT(Shape shape, std::initializer_list<T> values) : TensorT(std::move(shape), false) {
    ULID_CHECK(static_cast<int64_t>(values.size()) == numel_)
        << "value count " << values.size() << " vs shape " << shape_str(shape_);
    std::copy(values.begin(), values.end(), data_.get());
  }

  TensorT(Shape shape, const std::vector<T>& values) : TensorT(std::move(shape), false) {
    ULID_CHECK(static_cast<int64_t>(values.size()) == numel_)
        << "value count " << values.size() << " vs shape " << shape_str(shape_);
    std::copy(values.begin(), values.end(), data_.get());
  }

  TensorT(const TensorT& o) { *this = o; }
  TensorT& operator=(const TensorT& o) {
    if (this == &o) return *this;
    reset(o.shape_, false);
    std::memcpy(data_.get(), o.data_.get(), sizeof(T) * numel_);
    if (o.grad_) {
      alloc_grad();
      std::memcpy(grad_.get(), o.grad_.get(), sizeof(T) * numel_);
    } else {
      grad_.reset();
    }
    requires_grad = o.requires_grad;
    return *this;
  }
  TensorT(TensorT&&) noexcept = default;
  TensorT& operator=(TensorT&&) noexcept = default;

  void reset(Shape shape, bool zero_init) {
    shape_ = std::move(shape);
    numel_ = shape_numel(shape_);
    ULID_CHECK(numel_ > 0) << "empty shape " << shape_str(shape_);
    data_ = internal::pool_buf<T>(numel_, zero_init);
    grad_.reset();
  }

  const Shape& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t numel() const { return numel_; }

  T* data() { return data_.get(); }
  const T* data() const { return data_.get(); }
  T& at(int64_t i) { return data_[i]; }
  T at(int64_t i) const { return data_[i]; }

  bool has_grad() const { return grad_ != nullptr; }
  // Gradient buffer, zero-filled on first access.
  T* grad() {
    if (!grad_) alloc_grad();
    return grad_.get();
  }
  const T* grad() const { return grad_.get(); }
  void zero_grad() {
    if (grad_) std::memset(grad_.get(), 0, sizeof(T) * numel_);
  }
  void drop_grad() { grad_.reset(); }

  // Frees both buffers, leaving an empty shell. Used by the tape once a
  // node's backward has consumed this output.
  void release_buffers() {
    data_.reset();
    grad_.reset();
  }

  std::vector<T> to_vector() const { return std::vector<T>(data_.get(), data_.get() + numel_); }

  // True for leaves whose gradient a backward pass must populate (parameters,
  // inputs under test) and for any op output derived from such a leaf.
  bool requires_grad = false;

 private:
  void alloc_grad() { grad_ = internal::pool_buf<T>(numel_, /*zero=*/true); }

  Shape shape_;
  int64_t numel_ = 0;
  internal::PoolBuf<T> data_;
  internal::PoolBuf<T> grad_;
};

template <typename T>
using TensorPtrT = std::shared_ptr<TensorT<T>>;

template <typename T, typename... Args>
TensorPtrT<T> make_tensor(Args&&... args) {
  return std::make_shared<TensorT<T>>(std::forward<Args>(args)...);
}

template <typename T>
TensorPtrT<T> make_tensor(Shape shape, std::initializer_list<T> values) {
  return std::make_shared<TensorT<T>>(std::move(shape), values);
}

// Reverse-mode tape. Ops append one node per application in execution order,
// so walking the list back to front is exactly reverse topological order.
// A tensor consumed k times receives k additive contributions.
template <typename T>
class TapeT {
 public:
  void record(std::function<void()> backward_fn,
              TensorPtrT<T> output = nullptr) {
    nodes_.push_back(Node{std::move(backward_fn), std::move(output)});
  }

  // Once a node's backward has run, no earlier rule reads its output's data
  // or gradient again, so both buffers can be returned to the pool. Training
  // turns this on; it roughly halves peak memory.
  void set_release_memory(bool on) { release_memory_ = on; }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule.
  void backward_from(const TensorPtrT<T>& loss) {
    ULID_CHECK(loss->numel() == 1) << "backward_from expects a scalar, got "
                                   << shape_str(loss->shape());
    loss->grad()[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      it->fn();
      if (release_memory_ && it->output != nullptr) {
        it->output->release_buffers();
      }
    }
  }

  size_t num_nodes() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::function<void()> fn;
    TensorPtrT<T> output;
  };
  std::vector<Node> nodes_;
  bool release_memory_ = false;
};

using TensorF = TensorT<float>;
using TensorD = TensorT<double>;
using TensorPtrF = TensorPtrT<float>;
using TensorPtrD = TensorPtrT<double>;
using TapeF = TapeT<float>;
using TapeD = TapeT<double>;

}  // namespace ulid

#endif  // ULID_TENSOR_H_
