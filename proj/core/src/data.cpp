#include "groundal/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "groundal/error.hpp"
#include "groundal/random.hpp"

namespace groundal {
namespace {

std::vector<std::string_view> split_on(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail_at(std::size_t line, const std::string& what) {
  throw DataError("dataset line " + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view token, std::size_t line) {
  token = trim(token);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    fail_at(line, "cannot parse number '" + std::string(token) + "'");
  }
  if (!std::isfinite(value)) fail_at(line, "non-finite feature value");
  return value;
}

std::map<TraitKind, std::size_t> parse_header(std::string_view line, std::size_t line_no) {
  constexpr std::string_view kTag = "#dims";
  if (line.substr(0, kTag.size()) != kTag) fail_at(line_no, "missing '#dims' header");
  std::map<TraitKind, std::size_t> dims;
  std::istringstream fields{std::string(line.substr(kTag.size()))};
  std::string field;
  while (fields >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) fail_at(line_no, "bad header field '" + field + "'");
    const auto trait = parse_trait(std::string_view(field).substr(0, eq));
    if (!trait) fail_at(line_no, "unknown trait in header '" + field + "'");
    std::size_t dim = 0;
    const std::string_view digits = std::string_view(field).substr(eq + 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), dim);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || dim == 0) {
      fail_at(line_no, "bad dimension in header field '" + field + "'");
    }
    dims[*trait] = dim;
  }
  if (dims.empty()) fail_at(line_no, "header declares no traits");
  return dims;
}

std::string sanitize_description(const std::string& text) {
  std::string out = text;
  std::replace(out.begin(), out.end(), '\t', ' ');
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

}  // namespace

std::string_view trait_name(TraitKind trait) {
  switch (trait) {
    case TraitKind::Color: return "color";
    case TraitKind::Shape: return "shape";
    case TraitKind::ObjectType: return "object";
  }
  return "unknown";
}

std::optional<TraitKind> parse_trait(std::string_view name) {
  for (TraitKind trait : kAllTraits) {
    if (trait_name(trait) == name) return trait;
  }
  return std::nullopt;
}

const Eigen::VectorXd& Instance::feature(TraitKind trait) const {
  const auto it = features.find(trait);
  if (it == features.end()) {
    throw ValidationError("instance '" + id + "' has no " + std::string(trait_name(trait)) +
                          " features");
  }
  return it->second.values;
}

std::vector<InstanceIndex> Dataset::with_trait(std::span<const InstanceIndex> ids,
                                               TraitKind trait) const {
  std::vector<InstanceIndex> out;
  out.reserve(ids.size());
  for (InstanceIndex i : ids) {
    if (instances.at(i).has_trait(trait)) out.push_back(i);
  }
  return out;
}

Eigen::MatrixXd Dataset::feature_matrix(std::span<const InstanceIndex> ids, TraitKind trait) const {
  const auto dim_it = dims.find(trait);
  if (dim_it == dims.end()) {
    throw ValidationError("dataset has no " + std::string(trait_name(trait)) + " features");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()),
                      static_cast<Eigen::Index>(dim_it->second));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = instances.at(ids[r]).feature(trait).transpose();
  }
  return out;
}

Dataset parse_dataset(std::istream& in, const DatasetSchema& schema) {
  Dataset dataset;
  dataset.name = schema.name;
  std::unordered_set<std::string> seen_ids;
  bool have_header = false;
  std::string raw;
  std::size_t line_no = 0;
  std::size_t record_index = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string_view line = raw;
    if (trim(line).empty()) continue;
    if (!have_header) {
      dataset.dims = parse_header(line, line_no);
      if (schema.expected_dims && *schema.expected_dims != dataset.dims) {
        fail_at(line_no, "header dimensions differ from the expected schema");
      }
      have_header = true;
      continue;
    }
    if (line.front() == '#') continue;

    const auto fields = split_on(line, '\t');
    if (fields.size() < 2) fail_at(line_no, "record needs at least id and features columns");
    Instance inst;
    inst.id = std::string(trim(fields[0]));
    if (inst.id.empty()) fail_at(line_no, "empty instance id");
    if (!seen_ids.insert(inst.id).second) fail_at(line_no, "duplicate instance id '" + inst.id + "'");

    const std::string_view feature_field = trim(fields[1]);
    if (!feature_field.empty()) {
      for (std::string_view block : split_on(feature_field, '|')) {
        const auto colon = block.find(':');
        if (colon == std::string_view::npos) fail_at(line_no, "feature block without 'trait:'");
        const auto trait = parse_trait(trim(block.substr(0, colon)));
        if (!trait) fail_at(line_no, "unknown trait '" + std::string(block.substr(0, colon)) + "'");
        if (inst.features.count(*trait)) fail_at(line_no, "trait listed twice");
        const auto dim_it = dataset.dims.find(*trait);
        if (dim_it == dataset.dims.end()) {
          fail_at(line_no, "trait '" + std::string(trait_name(*trait)) + "' not declared in header");
        }
        const auto values = split_on(block.substr(colon + 1), ',');
        if (values.size() != dim_it->second) {
          fail_at(line_no, "record '" + inst.id + "' has " + std::string(trait_name(*trait)) +
                               " dimension " + std::to_string(values.size()) + ", expected " +
                               std::to_string(dim_it->second));
        }
        FeatureVector fv;
        fv.trait = *trait;
        fv.values.resize(static_cast<Eigen::Index>(values.size()));
        for (std::size_t k = 0; k < values.size(); ++k) {
          fv.values[static_cast<Eigen::Index>(k)] = parse_double(values[k], line_no);
        }
        inst.features.emplace(*trait, std::move(fv));
      }
    }
    if (inst.features.empty()) fail_at(line_no, "record '" + inst.id + "' has no feature vectors");

    const std::size_t n_desc = fields.size() - 2;
    if (n_desc == 1) {
      inst.description = std::string(fields[2]);
    } else if (n_desc > 1) {
      Rng rng = make_rng(derive_seed(schema.description_seed, record_index));
      inst.description = std::string(fields[2 + uniform_index(rng, n_desc)]);
    }
    dataset.instances.push_back(std::move(inst));
    ++record_index;
  }
  if (dataset.instances.empty()) throw DataError("empty dataset: no records found");
  return dataset;
}

Dataset load_dataset(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  DatasetSchema named = schema;
  if (named.name.empty()) named.name = path;
  return parse_dataset(in, named);
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  out << "#dims";
  for (const auto& [trait, dim] : dataset.dims) out << ' ' << trait_name(trait) << '=' << dim;
  out << '\n';
  char buf[64];
  for (const Instance& inst : dataset.instances) {
    out << inst.id << '\t';
    bool first_block = true;
    for (const auto& [trait, fv] : inst.features) {
      if (!first_block) out << '|';
      first_block = false;
      out << trait_name(trait) << ':';
      for (Eigen::Index k = 0; k < fv.values.size(); ++k) {
        if (k) out << ',';
        std::snprintf(buf, sizeof buf, "%.9g", fv.values[k]);
        out << buf;
      }
    }
    out << '\t' << sanitize_description(inst.description) << '\n';
  }
}

void write_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file '" + path + "'");
  write_dataset(dataset, out);
}

Dataset split_train_test(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test_fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.size();
  if (n < 2) throw ValidationError("splitting needs at least 2 instances");
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  std::vector<InstanceIndex> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(derive_seed(seed, 0x5917));
  shuffle_in_place(order, rng);

  Dataset out = dataset;
  out.split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(out.split.test.begin(), out.split.test.end());
  std::sort(out.split.train.begin(), out.split.train.end());
  return out;
}

LabeledPool::LabeledPool(std::span<const InstanceIndex> pool) : unlabeled_(pool.begin(), pool.end()) {
  if (unlabeled_.size() != pool.size()) throw ValidationError("pool contains duplicate indices");
}

LabeledPool advance_pool(const LabeledPool& pool, std::span<const InstanceIndex> batch) {
  LabeledPool next = pool;
  std::set<InstanceIndex> seen;
  for (InstanceIndex id : batch) {
    if (!seen.insert(id).second) {
      throw ValidationError("duplicate index " + std::to_string(id) + " in batch");
    }
    if (next.unlabeled_.erase(id) == 0) {
      throw ValidationError("index " + std::to_string(id) + " is not in the unlabeled pool");
    }
    next.labeled_.push_back(id);
  }
  return next;
}

}  // namespace groundal
