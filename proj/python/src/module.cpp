#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "svft/adapter.hpp"
#include "svft/adapter_io.hpp"
#include "svft/baselines.hpp"
#include "svft/errors.hpp"
#include "svft/patterns.hpp"
#include "svft/train.hpp"
#include "svft/verify.hpp"

namespace py = pybind11;
using namespace svft;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() == 1) {
    Matrix m(static_cast<std::size_t>(a.shape(0)), 1);
    std::copy(a.data(), a.data() + a.size(), m.data().begin());
    return m;
  }
  if (a.ndim() != 2) throw ShapeError("expected a 1-D or 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs(const SparsityPattern& p) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const Coord& c : p.indices()) out.emplace_back(c.row, c.col);
  return out;
}

py::dict report_dict(const train::RunReport& r) {
  py::dict d;
  d["method"] = r.config.method.to_string();
  d["trainable_params"] = r.trainable_params;
  d["initial_loss"] = r.initial_loss;
  d["final_loss"] = r.final_loss;
  d["reference_loss"] = r.reference_loss;
  d["recovery"] = r.recovery;
  d["loss_curve"] = r.loss_curve;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse singular-vector fine-tuning core";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ValueError>(m, "ValueError", base.ptr());
  py::register_exception<BudgetError>(m, "BudgetError", base.ptr());
  py::register_exception<UnsupportedShapeError>(m, "UnsupportedShapeError", base.ptr());
  py::register_exception<SpectrumDegeneracyError>(m, "SpectrumDegeneracyError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  auto fmt = py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ChecksumError>(m, "ChecksumError", fmt.ptr());

  m.def("svd", [](const Array& w) {
    const SvdFactors f = svd(to_matrix(w));
    return py::make_tuple(to_array(f.u), f.s, to_array(f.v));
  }, py::arg("w"), "Full SVD (U, S, V) with the package sign convention.");
  m.def("numerical_rank", [](const Array& w, double tol) { return numerical_rank(to_matrix(w), tol); },
        py::arg("w"), py::arg("tol") = 1e-9);

  m.def("pattern", [](const std::string& spec, const Array& w0) {
    const Matrix w = to_matrix(w0);
    const SvdFactors f = svd(w);
    return pairs(make_pattern(spec, w.rows(), w.cols(), &f));
  }, py::arg("spec"), py::arg("w0"), "Index pairs of 'plain', 'banded:d', 'random:total:seed' or 'topk:k'.");
  m.def("banded_count", &banded_count, py::arg("dim"), py::arg("band"));

  py::class_<SvftAdapter>(m, "Adapter")
      .def(py::init([](const Array& w0, const std::string& spec) {
             const Matrix w = to_matrix(w0);
             auto f = std::make_shared<const SvdFactors>(svd(w));
             return SvftAdapter::init(f, make_pattern(spec, w.rows(), w.cols(), f.get()));
           }),
           py::arg("w0"), py::arg("pattern") = "plain")
      .def_property(
          "values", [](const SvftAdapter& a) { return std::vector<double>(a.values().begin(), a.values().end()); },
          [](SvftAdapter& a, const std::vector<double>& v) {
            if (v.size() != a.num_trainable()) throw ShapeError("values length does not match the pattern");
            std::copy(v.begin(), v.end(), a.values().begin());
          })
      .def_property_readonly("indices", [](const SvftAdapter& a) { return pairs(a.pattern()); })
      .def_property_readonly("effective_rank", &SvftAdapter::effective_rank)
      .def_property_readonly("num_trainable", &SvftAdapter::num_trainable)
      .def("forward", [](const SvftAdapter& a, const Array& x) { return to_array(forward(a, to_matrix(x))); })
      .def("delta_w", [](const SvftAdapter& a) { return to_array(delta_w(a)); })
      .def("fuse", [](const SvftAdapter& a) { return to_array(fuse(a)); })
      .def("grad_values", [](const SvftAdapter& a, const Array& g) { return grad_values(a, to_matrix(g)); })
      .def("truncate", [](const SvftAdapter& a, std::size_t r, bool tb) { return truncate(a, r, tb); }, py::arg("r"),
           py::arg("truncate_base") = false);

  m.def("save_adapter", [](const std::string& path, const SvftAdapter& a, const Array& w0) {
    io::save_adapter(path, a, to_matrix(w0));
  });
  m.def("load_adapter", [](const std::string& path, const Array& w0) { return io::load_adapter(path, to_matrix(w0)); });

  m.def("solve_expressivity", [](const Array& w0, const Array& target) {
    return to_array(solve_expressivity(to_matrix(w0), to_matrix(target)));
  });
  m.def("param_count", [](const std::string& method, std::size_t layers, std::size_t dim, std::size_t r_or_k) {
    return baselines::param_count(baselines::parse_count_method(method), layers, dim, r_or_k);
  }, py::arg("method"), py::arg("layers"), py::arg("dim"), py::arg("r_or_k") = 0);

  m.def("train", [](const std::string& method, std::size_t d, std::size_t planted, double noise, std::size_t epochs,
                    double lr, std::uint64_t seed) {
    train::TaskSpec s;
    s.d1 = s.d2 = d;
    s.perturbation = {train::PerturbationKind::SparseSpectrum, planted, 1};
    s.noise_sigma = noise;
    s.seed = seed;
    train::TrainConfig c;
    c.method = train::parse_method(method);
    c.optimizer.lr = lr;
    c.epochs = epochs;
    py::gil_scoped_release release;
    const auto r = train::train_adapter(train::make_task(s), c);
    py::gil_scoped_acquire acquire;
    return report_dict(r);
  }, py::arg("method"), py::arg("d") = 16, py::arg("planted") = 12, py::arg("noise") = 0.01, py::arg("epochs") = 300,
     py::arg("lr") = 0.5, py::arg("seed") = 0,
     "Fine-tune one method on a planted sparse-spectrum task and return the run report.");

  m.def("verify", [](const std::vector<std::string>& suites) {
    verify::VerifyOptions opt;
    opt.suites = suites;
    py::dict out;
    for (const auto& r : verify::run_suites(opt)) out[py::str(r.name)] = r.passed();
    return out;
  }, py::arg("suites") = std::vector<std::string>{});
}
