#include "sarplan/core/state.hpp"

#include <bit>
#include <stdexcept>

namespace sarplan {

std::size_t State::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::string State::bitstring() const {
  std::string out(size_, '0');
  for (std::size_t i = 0; i < size_; ++i) {
    if (get(static_cast<FluentId>(i))) out[i] = '1';
  }
  return out;
}

State State::from_bitstring(std::string_view bits) {
  State s(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      s.set(static_cast<FluentId>(i), true);
    } else if (bits[i] != '0') {
      throw std::invalid_argument("state bitstring contains '" + std::string(1, bits[i]) + "'");
    }
  }
  return s;
}

std::size_t State::hash() const {
  // FNV-1a over the words, then mixed with the size.
  std::uint64_t h = 1469598103934665603ull;
  for (auto w : words_) {
    h ^= w;
    h *= 1099511628211ull;
    h ^= h >> 29;
  }
  h ^= size_ + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return static_cast<std::size_t>(h);
}

}  // namespace sarplan
