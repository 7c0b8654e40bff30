#include "common.hpp"
#include "wml/io.hpp"

#include <doctest.h>
#include <json.hpp>

using namespace wt;

TEST_CASE("tree JSON round trip") {
  std::mt19937_64 rng(50);
  const auto s = random_tree(rng, 5);
  const std::string text = io::tree_to_json(s->to_tree());
  const FilteredSpace back = FilteredSpace::from_tree(io::tree_from_json(text));
  REQUIRE(back.depth() == s->depth());
  REQUIRE(back.num_leaves() == s->num_leaves());
  for (int l = 0; l < s->num_leaves(); ++l) CHECK(back.leaf_prob(l) == s->leaf_prob(l));

  const auto t = FilteredSpace::from_tree(io::tree_from_json(R"({"children":[{"mass":0.25},{"mass":0.75}]})"));
  CHECK(t.leaf_prob(1) == 0.75);
  CHECK_THROWS_AS(io::tree_from_json(R"({"children":[{"mass":"x"}]})"), ValidationError);
  CHECK_THROWS(io::tree_from_json("{"));
}

TEST_CASE("weight and function CSV round trip") {
  std::mt19937_64 rng(51);
  const MatrixWeight w = random_weight(rng, 3, 7);
  const MatrixWeight wb = io::weight_from_csv(io::weight_to_csv(w));
  REQUIRE(wb.dim() == 3);
  REQUIRE(wb.size() == 7);
  for (int l = 0; l < 7; ++l) CHECK((wb.at(l) - w.at(l)).norm() < 1e-14 * w.at(l).norm());

  const LeafFunction f = random_function(rng, 2, 5);
  CHECK(io::function_from_csv(io::function_to_csv(f)).values == f.values);
  CHECK_THROWS_AS(io::function_from_csv("1,2\n3\n"), ValidationError);
  CHECK_THROWS_AS(io::function_from_csv("1,abc\n"), ValidationError);
  CHECK_THROWS_AS(io::weight_from_csv("1,2,3\n"), ValidationError);
  CHECK_THROWS_AS(io::read_file("/nonexistent/weight.csv"), io::IoError);
}

TEST_CASE("family and reducer export") {
  const auto s = dyadic(2);
  const WeightedSpace ws(s, MatrixWeight::identity(1, 4), 2);
  const ReducingPair pair = reduce_all(ws);
  const PrincipalContext ctx(ws, pair, LeafFunction::scalar({1, -1, 0, 0}));
  const auto fam = nlohmann::json::parse(io::family_to_json(build_principal_family(ctx, default_cgamma())));
  REQUIRE(fam["sets"].size() == 1);
  CHECK(fam["sets"][0]["kappa2"] == 2);
  CHECK(fam["sets"][0]["atoms"] == nlohmann::json::array({0, 1}));
  const auto red = nlohmann::json::parse(io::reducers_to_json(pair));
  CHECK(red["p"] == 2.0);
  CHECK(red["tilde"].size() == 3);
}
