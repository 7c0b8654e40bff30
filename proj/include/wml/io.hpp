#pragma once

#include "wml/experiments.hpp"
#include "wml/filtration.hpp"
#include "wml/matrix_weights.hpp"
#include "wml/principal_sets.hpp"

#include <filesystem>
#include <string>

namespace wml::io {

/// Raised on unreadable files; malformed contents raise ValidationError.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

/// {"mass": x, "children": [...]}, recursively; a missing mass at the root means 1.
TreeSpec tree_from_json(const std::string& text);
std::string tree_to_json(const TreeSpec& tree);

/// One row per leaf, d*d columns (row-major). No header.
MatrixWeight weight_from_csv(const std::string& text);
std::string weight_to_csv(const MatrixWeight& w);

/// One row per leaf, d columns. No header.
LeafFunction function_from_csv(const std::string& text);
std::string function_to_csv(const LeafFunction& f);

std::string reducers_to_json(const ReducingPair& pair);
/// Per set: generation, kappa1, kappa2, atoms, escape leaves.
std::string family_to_json(const PrincipalFamily& family);
std::string fit_to_json(const FitResult& fit);

}  // namespace wml::io
