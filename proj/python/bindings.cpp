#include "wml/experiments.hpp"
#include "wml/io.hpp"
#include "wml/suite.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace wml;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

using SpacePtr = std::shared_ptr<FilteredSpace>;

// (leaves, d, d) or (leaves,) for scalar weights.
MatrixWeight to_weight(const Array& a) {
  if (a.ndim() == 1) {
    std::vector<double> w(a.data(), a.data() + a.shape(0));
    return MatrixWeight::scalar(w);
  }
  if (a.ndim() != 3 || a.shape(1) != a.shape(2)) throw ValidationError("weights must have shape (leaves, d, d)");
  const int n = static_cast<int>(a.shape(0)), d = static_cast<int>(a.shape(1));
  if (d > kMaxDim) throw ValidationError("d must be at most 6");
  std::vector<Mat> leaves;
  auto r = a.unchecked<3>();
  for (int l = 0; l < n; ++l) {
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = r(l, i, j);
    leaves.push_back(m);
  }
  return MatrixWeight(d, std::move(leaves));
}

// (leaves, d) or (leaves,).
LeafFunction to_function(const Array& a) {
  if (a.ndim() == 1) return LeafFunction::scalar(std::vector<double>(a.data(), a.data() + a.shape(0)));
  if (a.ndim() != 2) throw ValidationError("functions must have shape (leaves, d)");
  LeafFunction f = LeafFunction::zeros(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (py::ssize_t l = 0; l < a.shape(0); ++l)
    for (py::ssize_t i = 0; i < a.shape(1); ++i) f.values(i, l) = r(l, i);
  return f;
}

py::array_t<double> leaf_values(const LeafFunction& f) {
  py::array_t<double> out({static_cast<py::ssize_t>(f.size())});
  auto w = out.mutable_unchecked<1>();
  for (int l = 0; l < f.size(); ++l) w(l) = f.values(0, l);
  return out;
}

py::array_t<double> weight_array(const MatrixWeight& w) {
  const py::ssize_t d = w.dim();
  py::array_t<double> out({static_cast<py::ssize_t>(w.size()), d, d});
  auto r = out.mutable_unchecked<3>();
  for (int l = 0; l < w.size(); ++l)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) r(l, i, j) = w.at(l)(i, j);
  return out;
}

DiffConvention convention(bool fold_mean) { return fold_mean ? DiffConvention::kFoldMean : DiffConvention::kCentered; }

void check_leaves(const FilteredSpace& s, int n) {
  if (n != s.num_leaves()) throw ValidationError("expected one row per leaf");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Matrix-weighted martingale square functions on finite filtrations";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

  py::class_<FilteredSpace, SpacePtr>(m, "FilteredSpace")
      .def_static("dyadic", [](int depth) { return std::make_shared<FilteredSpace>(FilteredSpace::dyadic(depth)); },
                  py::arg("depth"))
      .def_static("from_json",
                  [](const std::string& text) {
                    return std::make_shared<FilteredSpace>(FilteredSpace::from_tree(io::tree_from_json(text)));
                  },
                  py::arg("text"))
      .def("to_json", [](const FilteredSpace& s) { return io::tree_to_json(s.to_tree()); })
      .def_property_readonly("depth", &FilteredSpace::depth)
      .def_property_readonly("num_leaves", &FilteredSpace::num_leaves)
      .def("num_atoms", &FilteredSpace::num_atoms, py::arg("level"))
      .def("leaf_probs", [](const FilteredSpace& s) {
        std::vector<double> p;
        for (int l = 0; l < s.num_leaves(); ++l) p.push_back(s.leaf_prob(l));
        return p;
      });

  m.def(
      "cond_expect",
      [](const SpacePtr& s, const Array& f, int n) {
        const LeafFunction lf = to_function(f);
        check_leaves(*s, lf.size());
        return leaf_values(lift(*s, cond_expect(*s, lf, n), n));
      },
      py::arg("space"), py::arg("f"), py::arg("level"), "E_n f lifted to the leaves (scalar f).");

  m.def(
      "square_function",
      [](const SpacePtr& s, const Array& f, bool fold_mean) {
        const LeafFunction lf = to_function(f);
        check_leaves(*s, lf.size());
        return leaf_values(square_fn(*s, martingale_of(*s, lf, convention(fold_mean))));
      },
      py::arg("space"), py::arg("f"), py::arg("fold_mean") = false);

  m.def(
      "weighted_square_function",
      [](const SpacePtr& s, const Array& w, const Array& f, double p, bool fold_mean) {
        const WeightedSpace ws(s, to_weight(w), p);
        const LeafFunction lf = to_function(f);
        check_leaves(*s, lf.size());
        return leaf_values(weighted_square_fn(ws, lf, convention(fold_mean)));
      },
      py::arg("space"), py::arg("weights"), py::arg("f"), py::arg("p"), py::arg("fold_mean") = false);

  m.def(
      "ap_characteristic",
      [](const SpacePtr& s, const Array& w, double p, double tol, bool exact_p2) {
        ReducerOptions o;
        o.tol = tol;
        o.exact_p2 = exact_p2;
        return ap_characteristic(WeightedSpace(s, to_weight(w), p), o);
      },
      py::arg("space"), py::arg("weights"), py::arg("p"), py::arg("tol") = 1e-3, py::arg("exact_p2") = false);

  m.def(
      "opnorm_p2",
      [](const SpacePtr& s, std::vector<double> w, bool dense) {
        return dense ? dense_opnorm_p2(*s, w) : estimate_opnorm_p2(*s, w).ratio;
      },
      py::arg("space"), py::arg("weights"), py::arg("dense") = false,
      "sup ||S f||_{L^2_w} / ||f||_{L^2_w} for a scalar weight.");

  m.def(
      "opnorm_general",
      [](const SpacePtr& s, const Array& w, double p, int restarts, std::uint64_t seed) {
        return estimate_opnorm_general(WeightedSpace(s, to_weight(w), p), restarts, seed).ratio;
      },
      py::arg("space"), py::arg("weights"), py::arg("p"), py::arg("restarts") = 3, py::arg("seed") = 7);

  m.def(
      "power_weight",
      [](int depth, double alpha, double eps) {
        ScalarInstance inst = gen_power_weight(depth, alpha, eps);
        return py::make_tuple(std::const_pointer_cast<FilteredSpace>(inst.space), inst.w);
      },
      py::arg("depth"), py::arg("alpha"), py::arg("eps"));

  m.def(
      "rotating_weight",
      [](int depth, int d, double alpha, double eps, bool rotate) {
        MatrixInstance inst = gen_rotating_matrix_weight(depth, d, alpha, eps, rotate);
        return py::make_tuple(std::const_pointer_cast<FilteredSpace>(inst.space), weight_array(inst.w));
      },
      py::arg("depth"), py::arg("d"), py::arg("alpha"), py::arg("eps"), py::arg("rotate") = true);

  m.def(
      "exponent_fit",
      [](const std::vector<double>& ap, const std::vector<double>& ratio) {
        if (ap.size() != ratio.size()) throw ValidationError("ap and ratio differ in length");
        std::vector<std::pair<double, double>> pts;
        for (size_t i = 0; i < ap.size(); ++i) pts.emplace_back(ap[i], ratio[i]);
        const FitResult f = exponent_fit(pts);
        return py::dict(py::arg("slope") = f.slope, py::arg("intercept") = f.intercept, py::arg("stderr") = f.std_err,
                        py::arg("n") = f.n);
      },
      py::arg("ap"), py::arg("ratio"));

  m.def(
      "run_suite",
      [](std::uint64_t seed, int count, double cgamma, int threads) {
        SuiteOptions o;
        o.cgamma = cgamma;
        std::vector<InstanceReport> reports;
        {
          py::gil_scoped_release release;
          reports = run_suite(seed, count, InstanceSpec{}, o, threads);
        }
        const SuiteSummary s = summarize(reports, o);
        py::list lines;
        for (const CheckLine& l : s.lines)
          lines.append(py::dict(py::arg("name") = l.name, py::arg("pass") = l.pass, py::arg("gating") = l.gating,
                                py::arg("measured") = l.measured, py::arg("bound") = l.bound,
                                py::arg("detail") = l.detail));
        return py::dict(py::arg("instances") = s.instances, py::arg("pass") = s.pass(), py::arg("lines") = lines);
      },
      py::arg("seed") = 7, py::arg("count") = 20, py::arg("cgamma") = default_cgamma(), py::arg("threads") = 1);

  m.def("default_cgamma", &default_cgamma);
  m.def("k_domination", &k_domination, py::arg("cgamma"));
  m.def("scalar_target_exponent", &scalar_target_exponent, py::arg("p"));
  m.def("matrix_target_exponent", &matrix_target_exponent, py::arg("p"));
}
