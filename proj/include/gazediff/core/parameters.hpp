#pragma once

#include <deque>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>

#include "gazediff/core/tape.hpp"

namespace gazediff {

/// Named, insertion-ordered parameter tensors. Element addresses are stable.
template <class T>
class ParameterStore {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  Tensor<T>& add(const std::string& name, Tensor<T> value) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    index_[name] = entries_.size();
    entries_.emplace_back(name, std::move(value));
    return entries_.back().second;
  }

  Tensor<T>& at(const std::string& name) { return entries_[lookup(name)].second; }
  const Tensor<T>& at(const std::string& name) const { return entries_[lookup(name)].second; }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::deque<Entry>& entries() const { return entries_; }
  std::deque<Entry>& entries() { return entries_; }

  std::size_t count() const { return entries_.size(); }
  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.size();
    return n;
  }

  template <class U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (const auto& [name, t] : entries_) out.add(name, t.template cast<U>());
    return out;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
    return it->second;
  }

  std::deque<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Binds store entries onto one tape as gradient-carrying leaves, on first use.
template <class T>
class BoundParameters {
 public:
  BoundParameters(Tape<T>& tape, const ParameterStore<T>& store) : tape_(tape), store_(store) {}

  Var<T> operator()(const std::string& name) {
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    Var<T> v = tape_.parameter(store_.at(name));
    vars_.emplace(name, v);
    return v;
  }

  Tape<T>& tape() { return tape_; }

  /// Gradients of every bound parameter after tape.backward().
  std::map<std::string, Tensor<T>> gradients() {
    std::map<std::string, Tensor<T>> out;
    for (const auto& [name, v] : vars_) out.emplace(name, tape_.grad_of(v));
    return out;
  }

 private:
  Tape<T>& tape_;
  const ParameterStore<T>& store_;
  std::unordered_map<std::string, Var<T>> vars_;
};

}  // namespace gazediff
