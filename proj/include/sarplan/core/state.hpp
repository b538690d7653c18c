#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace sarplan {

using FluentId = std::uint32_t;

struct FluentLiteral {
  FluentId fluent = 0;
  bool value = true;

  friend bool operator==(const FluentLiteral&, const FluentLiteral&) = default;
  friend auto operator<=>(const FluentLiteral&, const FluentLiteral&) = default;
};

// Full boolean assignment over a fixed fluent order. Bits beyond size() are
// always zero so word-wise comparison and hashing are canonical.
class State {
 public:
  State() = default;
  explicit State(std::size_t num_fluents)
      : size_(num_fluents), words_((num_fluents + 63) / 64, 0) {}

  std::size_t size() const { return size_; }

  bool get(FluentId f) const { return (words_[f >> 6] >> (f & 63)) & 1u; }

  void set(FluentId f, bool v) {
    const std::uint64_t mask = std::uint64_t{1} << (f & 63);
    if (v) {
      words_[f >> 6] |= mask;
    } else {
      words_[f >> 6] &= ~mask;
    }
  }

  bool satisfies(const FluentLiteral& lit) const { return get(lit.fluent) == lit.value; }

  bool satisfies(const std::vector<FluentLiteral>& lits) const {
    for (const auto& l : lits) {
      if (!satisfies(l)) return false;
    }
    return true;
  }

  void apply(const std::vector<FluentLiteral>& effects) {
    for (const auto& l : effects) set(l.fluent, l.value);
  }

  State applied(const std::vector<FluentLiteral>& effects) const {
    State next = *this;
    next.apply(effects);
    return next;
  }

  std::size_t count() const;

  /// '0'/'1' per fluent in fluent order.
  std::string bitstring() const;
  /// Throws std::invalid_argument on characters other than '0'/'1'.
  static State from_bitstring(std::string_view bits);

  std::size_t hash() const;

  const std::vector<std::uint64_t>& words() const { return words_; }

  friend bool operator==(const State&, const State&) = default;
  friend bool operator<(const State& a, const State& b) {
    if (a.size_ != b.size_) return a.size_ < b.size_;
    return a.words_ < b.words_;
  }

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

struct StateHash {
  std::size_t operator()(const State& s) const { return s.hash(); }
};

}  // namespace sarplan

template <>
struct std::hash<sarplan::State> {
  std::size_t operator()(const sarplan::State& s) const { return s.hash(); }
};
