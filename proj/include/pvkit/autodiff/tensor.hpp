// Copyright 2026 The pvkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pvkit::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

enum class Mode { kTrain, kEval };

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until the node takes part in a backward pass
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T{0});
    return grad;
  }
};

}  // namespace detail

// Dense row-major tensor handle. Copies share the underlying node, so a
// Tensor behaves like a reference to an immutable value; only optimizers
// write into parameter data in place.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  std::span<T> mutable_data() { return node_->value; }
  T item() const;
  T at(std::size_t flat_index) const { return node_->value.at(flat_index); }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  // A gradient-free copy of the current value.
  Tensor detach() const;
  const char* op_name() const { return node_->op; }

  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

// Builds the result node of a differentiable op. The backward closure and
// parent links are recorded only when some parent requires a gradient.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                      const std::vector<Tensor<T>>& parents,
                      std::function<void(detail::Node<T>&)> backward);

// Reverse topological replay of a recorded graph.
template <typename T>
class Tape {
 public:
  static Tape record(const Tensor<T>& root);

  // Clears the grads of every recorded node (leaves included), seeds the
  // root with `seed` (ones when empty) and propagates. Replaying twice yields
  // identical gradients.
  void backward(std::span<const T> seed = {}) const;
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<std::shared_ptr<detail::Node<T>>> order_;  // root last
};

template <typename T>
void backward(const Tensor<T>& root) {
  Tape<T>::record(root).backward();
}

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

// Non-trainable state (batch-norm running statistics) that is checkpointed.
template <typename T>
struct NamedBuffer {
  std::string name;
  std::vector<T>* values;
};

}  // namespace pvkit::ad
