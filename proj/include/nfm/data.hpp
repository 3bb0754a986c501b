#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nfm/random.hpp"
#include "nfm/types.hpp"

namespace nfm {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// One example: sorted non-zero (index, value) pairs plus a real target.
template <class Scalar>
struct SparseInstance {
  std::vector<Index> indices;  // strictly increasing, non-negative
  std::vector<Scalar> values;  // same length, finite and non-zero
  Scalar target = 0;

  Index nnz() const { return static_cast<Index>(indices.size()); }

  bool operator==(const SparseInstance&) const = default;
};

template <class Scalar>
struct Dataset {
  std::vector<SparseInstance<Scalar>> instances;
  Index num_features = 1;

  Index size() const { return static_cast<Index>(instances.size()); }

  bool operator==(const Dataset&) const = default;
};

struct SplitSpec {
  double train_fraction = 0.7;
  double valid_fraction = 0.2;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
};

// Contiguous block of the feature space, e.g. the one-hot item field.
struct FeatureRange {
  Index begin = 0;
  Index end = 0;  // exclusive

  Index size() const { return end - begin; }
  bool contains(Index i) const { return i >= begin && i < end; }
};

namespace detail {

inline double parse_double_token(std::string_view tok, std::size_t line, const char* what) {
  double out;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, std::string("expected a number for ") + what + ", got '" +
                               std::string(tok) + "'");
  }
  return out;
}

inline long long parse_index_token(std::string_view tok, std::size_t line) {
  long long out;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "expected an integer feature index, got '" + std::string(tok) + "'");
  }
  if (out < 0) {
    throw ParseError(line, "negative feature index " + std::to_string(out));
  }
  return out;
}

}  // namespace detail

// Reads the libfm text format: one instance per line,
//   <target> <idx>:<value> [<idx>:<value> ...]
// Lines starting with '#' are comments; blank lines are skipped; \r\n is
// accepted. Entries with value 0 are dropped and entries are re-sorted by
// index. num_features is 1 + the largest index seen.
template <class Scalar = double>
Dataset<Scalar> parse_libfm(std::istream& in) {
  Dataset<Scalar> data;
  Index max_index = -1;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::pair<Index, Scalar>> entries;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view view(line);
    // skip leading whitespace, blank lines and comments
    const auto first = view.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    if (view[first] == '#') continue;

    SparseInstance<Scalar> inst;
    entries.clear();
    std::size_t pos = first;
    bool have_target = false;
    while (pos < view.size()) {
      const auto end = std::min(view.find_first_of(" \t", pos), view.size());
      const std::string_view tok = view.substr(pos, end - pos);
      if (!have_target) {
        inst.target = static_cast<Scalar>(detail::parse_double_token(tok, line_no, "the target"));
        have_target = true;
      } else {
        const auto colon = tok.find(':');
        if (colon == std::string_view::npos) {
          throw ParseError(line_no, "expected <index>:<value>, got '" + std::string(tok) + "'");
        }
        const long long idx = detail::parse_index_token(tok.substr(0, colon), line_no);
        const double value = detail::parse_double_token(tok.substr(colon + 1), line_no, "a feature value");
        if (!std::isfinite(value)) {
          throw ParseError(line_no, "non-finite feature value");
        }
        entries.emplace_back(static_cast<Index>(idx), static_cast<Scalar>(value));
      }
      pos = view.find_first_not_of(" \t", end);
      if (pos == std::string_view::npos) break;
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < entries.size(); ++i) {
      if (entries[i].first == entries[i - 1].first) {
        throw ParseError(line_no, "duplicate feature index " + std::to_string(entries[i].first));
      }
    }
    for (const auto& [idx, value] : entries) {
      if (value == Scalar(0)) continue;  // zero means "feature absent"
      inst.indices.push_back(idx);
      inst.values.push_back(value);
      max_index = std::max(max_index, idx);
    }
    data.instances.push_back(std::move(inst));
  }
  data.num_features = std::max<Index>(1, max_index + 1);
  return data;
}

template <class Scalar = double>
Dataset<Scalar> parse_libfm(const std::string& text) {
  std::istringstream in(text);
  return parse_libfm<Scalar>(in);
}

// Writes the same format parse_libfm reads; 17 significant digits so doubles
// round-trip exactly.
template <class Scalar>
void write_libfm(const Dataset<Scalar>& data, std::ostream& out) {
  out << std::setprecision(17);
  for (const auto& inst : data.instances) {
    out << inst.target;
    for (Index i = 0; i < inst.nnz(); ++i) {
      out << ' ' << inst.indices[i] << ':' << inst.values[i];
    }
    out << '\n';
  }
}

// Seeded shuffle, then partition: train and valid sizes are rounded down,
// test takes the remainder. All parts inherit num_features.
template <class Scalar>
std::array<Dataset<Scalar>, 3> split(const Dataset<Scalar>& data, const SplitSpec& spec) {
  if (data.instances.empty()) {
    throw std::invalid_argument("split: dataset is empty");
  }
  if (spec.train_fraction <= 0 || spec.valid_fraction <= 0 || spec.test_fraction <= 0) {
    throw std::invalid_argument("split: fractions must be positive");
  }
  if (std::abs(spec.train_fraction + spec.valid_fraction + spec.test_fraction - 1.0) > 1e-9) {
    throw std::invalid_argument("split: fractions must sum to 1");
  }
  const auto n = data.instances.size();
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n) + 1e-9));
  const auto n_valid = static_cast<std::size_t>(std::floor(spec.valid_fraction * static_cast<double>(n) + 1e-9));
  if (n_train == 0 || n_valid == 0 || n_train + n_valid >= n) {
    throw std::invalid_argument("split: a part would be empty");
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);

  std::array<Dataset<Scalar>, 3> parts;
  const std::array<std::size_t, 3> sizes = {n_train, n_valid, n - n_train - n_valid};
  std::size_t at = 0;
  for (int p = 0; p < 3; ++p) {
    parts[p].num_features = data.num_features;
    parts[p].instances.reserve(sizes[p]);
    for (std::size_t i = 0; i < sizes[p]; ++i) {
      parts[p].instances.push_back(data.instances[order[at++]]);
    }
  }
  return parts;
}

namespace detail {

// Context key: every (index, value) pair of an instance except the item slot.
template <class Scalar>
std::string context_key(const SparseInstance<Scalar>& inst, Index item_slot) {
  std::string key;
  key.reserve(inst.indices.size() * 16);
  for (Index i = 0; i < inst.nnz(); ++i) {
    if (i == item_slot) continue;
    const auto idx = static_cast<std::uint64_t>(inst.indices[i]);
    const double value = static_cast<double>(inst.values[i]);
    char buf[16];
    std::memcpy(buf, &idx, 8);
    std::memcpy(buf + 8, &value, 8);
    key.append(buf, 16);
  }
  return key;
}

template <class Scalar>
Index item_slot_of(const SparseInstance<Scalar>& inst, const FeatureRange& field,
                   std::size_t instance_no) {
  Index slot = -1;
  for (Index i = 0; i < inst.nnz(); ++i) {
    if (!field.contains(inst.indices[i])) continue;
    if (slot >= 0) {
      throw std::invalid_argument("negative_sample: instance " + std::to_string(instance_no) +
                                  " has more than one active index in the item field");
    }
    slot = i;
  }
  if (slot < 0) {
    throw std::invalid_argument("negative_sample: instance " + std::to_string(instance_no) +
                                " has no active index in the item field");
  }
  return slot;
}

}  // namespace detail

// Pairs every positive instance (target forced to +1) with `ratio` copies
// whose item-field index is replaced by a uniformly drawn item that never
// appears as a positive for the same remaining context; copies get target -1.
// Output order is each positive followed by its negatives.
template <class Scalar>
Dataset<Scalar> negative_sample(const Dataset<Scalar>& positives, const FeatureRange& item_field,
                                int ratio, std::uint64_t seed) {
  if (ratio < 1) throw std::invalid_argument("negative_sample: ratio must be >= 1");
  if (item_field.begin < 0 || item_field.end <= item_field.begin ||
      item_field.end > positives.num_features) {
    throw std::invalid_argument("negative_sample: item field out of range");
  }

  // context -> sorted positive item offsets within the field
  std::unordered_map<std::string, std::vector<Index>> seen;
  std::vector<Index> slots(positives.instances.size());
  for (std::size_t i = 0; i < positives.instances.size(); ++i) {
    const auto& inst = positives.instances[i];
    slots[i] = detail::item_slot_of(inst, item_field, i);
    seen[detail::context_key(inst, slots[i])].push_back(inst.indices[slots[i]] - item_field.begin);
  }
  for (auto& [key, items] : seen) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }

  Rng rng(seed);
  Dataset<Scalar> out;
  out.num_features = positives.num_features;
  out.instances.reserve(positives.instances.size() * static_cast<std::size_t>(1 + ratio));
  for (std::size_t i = 0; i < positives.instances.size(); ++i) {
    auto pos = positives.instances[i];
    pos.target = Scalar(1);
    const Index slot = slots[i];
    const auto& taken = seen.at(detail::context_key(pos, slot));
    const Index available = item_field.size() - static_cast<Index>(taken.size());
    if (available <= 0) {
      std::ostringstream msg;
      msg << "negative_sample: item field exhausted for the context of instance " << i << " (";
      for (Index j = 0; j < pos.nnz(); ++j) {
        if (j == slot) continue;
        msg << ' ' << pos.indices[j] << ':' << pos.values[j];
      }
      msg << " )";
      throw std::runtime_error(msg.str());
    }
    out.instances.push_back(pos);
    for (int r = 0; r < ratio; ++r) {
      // r-th element of the complement of `taken` in [0, field size)
      Index draw = static_cast<Index>(rng.below(static_cast<std::uint64_t>(available)));
      for (Index t : taken) {
        if (t <= draw) ++draw;
      }
      auto neg = pos;
      neg.indices[slot] = item_field.begin + draw;
      neg.target = Scalar(-1);
      out.instances.push_back(std::move(neg));
    }
  }
  return out;
}

}  // namespace nfm
