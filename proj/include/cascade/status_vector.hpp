#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cascade {

// Packed in-service/out-of-service flags for lines or generators.
// Bit set means the element is in service.
class StatusVector {
public:
  StatusVector() = default;

  explicit StatusVector(std::size_t size, bool in_service = true)
      : size_(size), words_((size + 63) / 64, in_service ? ~std::uint64_t{0} : 0) {
    trim();
  }

  static StatusVector from_string(std::string_view bits) {
    StatusVector s(bits.size(), false);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] == '1')
        s.set(i, true);
      else if (bits[i] != '0')
        throw std::invalid_argument("status string must contain only 0/1");
    }
    return s;
  }

  std::size_t size() const { return size_; }

  bool operator[](std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }

  bool in_service(std::size_t i) const { return (*this)[i]; }

  void set(std::size_t i, bool value) {
    const std::uint64_t mask = std::uint64_t{1} << (i % 64);
    if (value)
      words_[i / 64] |= mask;
    else
      words_[i / 64] &= ~mask;
  }

  StatusVector with_removed(std::size_t i) const {
    StatusVector s = *this;
    s.set(i, false);
    return s;
  }

  std::size_t count_in_service() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(__builtin_popcountll(w));
    return n;
  }

  std::size_t count_out_of_service() const { return size_ - count_in_service(); }

  std::vector<int> out_of_service() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < size_; ++i)
      if (!(*this)[i]) out.push_back(static_cast<int>(i));
    return out;
  }

  // True when every element in service here is also in service in `other`,
  // i.e. this state is reachable from `other` by removals only.
  bool is_descendant_of(const StatusVector& other) const {
    if (other.size_ != size_) return false;
    for (std::size_t w = 0; w < words_.size(); ++w)
      if ((words_[w] & ~other.words_[w]) != 0) return false;
    return true;
  }

  std::string to_string() const {
    std::string s(size_, '0');
    for (std::size_t i = 0; i < size_; ++i)
      if ((*this)[i]) s[i] = '1';
    return s;
  }

  std::size_t hash() const {
    std::size_t h = std::hash<std::size_t>{}(size_);
    for (auto w : words_) h ^= std::hash<std::uint64_t>{}(w) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }

  friend bool operator==(const StatusVector& a, const StatusVector& b) {
    return a.size_ == b.size_ && a.words_ == b.words_;
  }

private:
  void trim() {
    if (size_ % 64 != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
  }

  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

struct StatusVectorHash {
  std::size_t operator()(const StatusVector& s) const { return s.hash(); }
};

} // namespace cascade
