#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "volterra_net/baselines.hpp"
#include "volterra_net/experiments.hpp"
#include "volterra_net/mlp.hpp"
#include "volterra_net/model_io.hpp"
#include "volterra_net/neural_sve.hpp"
#include "volterra_net/parallel.hpp"
#include "volterra_net/run.hpp"
#include "volterra_net/stability.hpp"

namespace py = pybind11;
using namespace vnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(std::span<const double> values, std::size_t rows, std::size_t cols) {
    Array out({rows, cols});
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

Array vector_array(std::span<const double> values) {
    Array out(static_cast<py::ssize_t>(values.size()));
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

Array path_array(const SamplePath& path) { return to_array(path.values(), path.grid().n_nodes(), path.dim()); }

Array increments_array(const BrownianPath& path) {
    return to_array(path.increments(), path.grid().n_steps(), path.dim());
}

// Accepts 1-d arrays as a single column.
std::pair<std::vector<double>, std::size_t> matrix(const Array& a, const char* what) {
    if (a.ndim() != 1 && a.ndim() != 2)
        throw Error(ErrorKind::ShapeMismatch, std::string(what) + " must be 1-d or 2-d");
    const std::size_t cols = a.ndim() == 2 ? static_cast<std::size_t>(a.shape(1)) : 1;
    return {std::vector<double>(a.data(), a.data() + a.size()), cols};
}

BrownianPath brownian_from(const TimeGrid& grid, const Array& increments) {
    auto [values, cols] = matrix(increments, "increments");
    return BrownianPath(grid, cols, std::move(values));
}

SamplePath sample_path_from(const Array& values, double dt) {
    auto [data, cols] = matrix(values, "path");
    const std::size_t nodes = data.size() / cols;
    if (nodes < 2) throw Error(ErrorKind::ShapeMismatch, "a path needs at least two nodes");
    return SamplePath(make_uniform_grid(static_cast<double>(nodes - 1) * dt, dt), cols, std::move(data));
}

py::object from_json(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::dict report_dict(const LossReport& r) {
    py::list epochs;
    for (const auto& e : r.epochs) epochs.append(py::make_tuple(e.epoch, e.learning_rate, e.train_loss));
    py::dict d;
    d["objective"] = r.objective;
    d["epochs"] = epochs;
    d["final_train_objective"] = r.final_train_objective;
    d["train_loss"] = r.train_loss;
    d["test_loss"] = r.test_loss;
    d["wall_seconds"] = r.wall_seconds;
    d["seed"] = r.seed;
    return d;
}

PyObject* error_type = nullptr;

}  // namespace

PYBIND11_MODULE(_volterra_net, m) {
    m.doc() = "Neural stochastic Volterra equations";

    error_type = PyErr_NewException("volterra_net.VolterraError", PyExc_RuntimeError, nullptr);
    m.attr("VolterraError") = py::handle(error_type);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object inst = py::reinterpret_steal<py::object>(PyObject_CallFunction(error_type, "s", e.what()));
            inst.attr("kind") = std::string(to_string(e.kind()));
            PyErr_SetObject(error_type, inst.ptr());
        }
    });

    m.def("set_thread_limit", &set_thread_limit, py::arg("n"));

    py::class_<TimeGrid>(m, "TimeGrid")
        .def_property_readonly("horizon", &TimeGrid::horizon)
        .def_property_readonly("dt", &TimeGrid::dt)
        .def_property_readonly("n_steps", &TimeGrid::n_steps)
        .def_property_readonly("n_nodes", &TimeGrid::n_nodes)
        .def("nodes", [](const TimeGrid& g) { return vector_array(g.nodes()); })
        .def("__eq__", &TimeGrid::operator==)
        .def("__repr__", [](const TimeGrid& g) {
            return "TimeGrid(T=" + std::to_string(g.horizon()) + ", dt=" + std::to_string(g.dt()) + ")";
        });
    m.def("uniform_grid", &make_uniform_grid, py::arg("T"), py::arg("dt"));

    py::class_<BrownianPath>(m, "BrownianPath")
        .def(py::init(&brownian_from), py::arg("grid"), py::arg("increments"))
        .def_property_readonly("grid", &BrownianPath::grid)
        .def_property_readonly("dim", &BrownianPath::dim)
        .def_property_readonly("increments", &increments_array)
        .def("cumulative", [](const BrownianPath& b) {
            return to_array(b.cumulative(), b.grid().n_nodes(), b.dim());
        });
    m.def("sample_brownian",
          py::overload_cast<const TimeGrid&, std::size_t, std::uint64_t>(&sample_brownian),
          py::arg("grid"), py::arg("dim"), py::arg("seed"));
    m.def("coarsen_brownian", &coarsen_brownian, py::arg("path"), py::arg("factor"));

    m.def("mean_relative_l2",
          [](const std::vector<Array>& preds, const std::vector<Array>& targets, double dt) {
              std::vector<SamplePath> p, t;
              for (const auto& a : preds) p.push_back(sample_path_from(a, dt));
              for (const auto& a : targets) t.push_back(sample_path_from(a, dt));
              return mean_relative_l2(p, t);
          },
          py::arg("preds"), py::arg("targets"), py::arg("dt"));
    m.def("lipswish", py::vectorize([](double z) { return lipswish(z); }), py::arg("z"));

    py::class_<ExperimentSpec>(m, "Experiment")
        .def_readonly("name", &ExperimentSpec::name)
        .def_readonly("horizon", &ExperimentSpec::horizon)
        .def_readonly("dt", &ExperimentSpec::dt)
        .def_property_readonly("d", [](const ExperimentSpec& s) { return s.problem.d; })
        .def_property_readonly("m", [](const ExperimentSpec& s) { return s.problem.m; })
        .def_property_readonly("law", [](const ExperimentSpec& s) { return s.law.describe(); })
        .def("grid", &ExperimentSpec::grid)
        .def("supports", [](const ExperimentSpec& s, const std::string& model) {
            return s.supports(parse_model_kind(model));
        });
    m.def("experiment", &experiment_by_name, py::arg("name"));
    m.def("with_deterministic_start", &with_deterministic_start, py::arg("spec"), py::arg("xi"));
    m.def("simulate",
          [](const ExperimentSpec& spec, const std::vector<double>& xi, const BrownianPath& noise) {
              return path_array(euler_maruyama(spec.problem, xi, noise));
          },
          py::arg("spec"), py::arg("xi"), py::arg("noise"));

    py::class_<PathRecord>(m, "PathRecord")
        .def_readonly("xi", &PathRecord::xi)
        .def_readonly("noise", &PathRecord::noise)
        .def_property_readonly("path", [](const PathRecord& r) { return path_array(r.path); });

    py::class_<PathDataset>(m, "PathDataset")
        .def_readonly("grid", &PathDataset::grid)
        .def_readonly("records", &PathDataset::records)
        .def_readonly("train_indices", &PathDataset::train_indices)
        .def_readonly("test_indices", &PathDataset::test_indices)
        .def("__len__", [](const PathDataset& d) { return d.records.size(); });
    m.def("generate_dataset",
          [](const ExperimentSpec& spec, std::size_t n, std::uint64_t seed, std::optional<double> horizon,
             std::optional<double> dt) {
              const TimeGrid grid = make_uniform_grid(horizon.value_or(spec.horizon), dt.value_or(spec.dt));
              py::gil_scoped_release release;
              return generate_dataset(spec, grid, n, seed);
          },
          py::arg("spec"), py::arg("n"), py::arg("seed") = 0, py::arg("T") = py::none(), py::arg("dt") = py::none());

    py::class_<PathModel>(m, "PathModel")
        .def_property_readonly("kind", [](const PathModel& p) { return std::string(to_string(p.kind())); })
        .def_property_readonly("dim", &PathModel::dim)
        .def_property_readonly("noise_dim", &PathModel::noise_dim)
        .def("predict",
             [](const PathModel& p, const std::vector<double>& xi, const BrownianPath& noise) {
                 return path_array(p.predict(xi, noise));
             },
             py::arg("xi"), py::arg("noise"));

    auto dims = [](std::size_t d, std::size_t m_, std::size_t latent, std::size_t width) {
        return LatentDims{d, m_, latent, width};
    };
    py::class_<NeuralSveModel, PathModel>(m, "NeuralSVE")
        .def(py::init([dims](std::size_t d, std::size_t m_, std::size_t latent, std::size_t width, std::uint64_t seed) {
                 return NeuralSveModel::init(dims(d, m_, latent, width), seed);
             }),
             py::arg("d") = 1, py::arg("m") = 1, py::arg("latent") = 12, py::arg("kernel_width") = 12,
             py::arg("seed") = 0)
        .def_property_readonly("n_params", [](const NeuralSveModel& x) { return x.params().size(); })
        .def_property_readonly("parameters", [](const NeuralSveModel& x) { return vector_array(x.params().values()); })
        .def("save", [](const NeuralSveModel& x, const std::string& stem) { save_model(x, stem); }, py::arg("stem"));

    py::class_<NeuralSdeModel, PathModel>(m, "NeuralSDE")
        .def(py::init([dims](std::size_t d, std::size_t m_, std::size_t latent, std::size_t width, std::uint64_t seed) {
                 return NeuralSdeModel::init(dims(d, m_, latent, width), seed);
             }),
             py::arg("d") = 1, py::arg("m") = 1, py::arg("latent") = 12, py::arg("kernel_width") = 12,
             py::arg("seed") = 0)
        .def_property_readonly("n_params", [](const NeuralSdeModel& x) { return x.params().size(); })
        .def_property_readonly("parameters", [](const NeuralSdeModel& x) { return vector_array(x.params().values()); })
        .def("save", [](const NeuralSdeModel& x, const std::string& stem) { save_model(x, stem); }, py::arg("stem"));

    py::class_<DeepOnetModel, PathModel>(m, "DeepONet")
        .def(py::init([](const TimeGrid& grid, std::size_t m_, std::uint64_t seed) {
                 return DeepOnetModel::init(grid, m_, DeepOnetConfig{}, seed);
             }),
             py::arg("grid"), py::arg("m") = 1, py::arg("seed") = 0)
        .def_property_readonly("n_params", [](const DeepOnetModel& x) { return x.params().size(); })
        .def_property_readonly("parameters", [](const DeepOnetModel& x) { return vector_array(x.params().values()); })
        .def("save", [](const DeepOnetModel& x, const std::string& stem) { save_model(x, stem); }, py::arg("stem"));

    m.def("load_model", [](const std::string& stem) { return load_model(stem); }, py::arg("stem"));

    m.def("train",
          [](PathModel& model, const PathDataset& data, std::optional<std::size_t> epochs, std::size_t batch_size,
             std::optional<double> lr, std::uint64_t seed) {
              TrainConfig cfg;
              cfg.epochs = epochs.value_or(default_epochs(data.records.size()));
              cfg.batch_size = batch_size;
              cfg.learning_rate = lr.value_or(model.kind() == ModelKind::DeepOnet ? 1e-3 : 0.01);
              cfg.seed = seed;
              LossReport report;
              {
                  py::gil_scoped_release release;
                  if (auto* x = dynamic_cast<NeuralSveModel*>(&model)) report = fit_and_evaluate(*x, data, cfg);
                  else if (auto* y = dynamic_cast<NeuralSdeModel*>(&model)) report = fit_and_evaluate(*y, data, cfg);
                  else if (auto* z = dynamic_cast<DeepOnetModel*>(&model)) report = fit_and_evaluate(*z, data, cfg);
                  else throw Error(ErrorKind::InvalidArgument, "model cannot be trained");
              }
              return report_dict(report);
          },
          py::arg("model"), py::arg("data"), py::arg("epochs") = py::none(), py::arg("batch_size") = 32,
          py::arg("lr") = py::none(), py::arg("seed") = 0);

    m.def("evaluate",
          [](const PathModel& model, const PathDataset& data) {
              py::gil_scoped_release release;
              const SplitLosses l = evaluate(model, data);
              return std::make_pair(l.train, l.test);
          },
          py::arg("model"), py::arg("data"));

    m.def("stability_scan",
          [](const std::string& channel, double p, std::size_t n_mc, std::optional<std::vector<double>> epsilons,
             std::optional<double> horizon, std::optional<double> dt, const std::string& base, std::uint64_t seed) {
              PerturbationPlan plan = default_stability_plan(parse_channel(channel));
              if (base == "g_only") {
                  plan.base.mu = CoefficientFn::constant(1, 1, 0.0);
                  plan.base.sigma = CoefficientFn::constant(1, 1, 0.0);
              } else if (base != "lipschitz_ou") {
                  throw Error(ErrorKind::ValidationError, "base must be lipschitz_ou or g_only");
              }
              plan.p = p;
              plan.n_mc = n_mc;
              if (epsilons) plan.epsilons = *epsilons;
              if (horizon || dt) plan.grid = make_uniform_grid(horizon.value_or(5.0), dt.value_or(0.1));
              StabilityResult r;
              {
                  py::gil_scoped_release release;
                  r = stability_scan(plan, seed);
              }
              py::list points;
              for (const auto& pt : r.points) {
                  py::dict d;
                  d["epsilon"] = pt.epsilon;
                  d["abscissa"] = pt.abscissa;
                  d["D"] = pt.distance;
                  d["slope_running"] = pt.running_slope;
                  points.append(d);
              }
              py::dict out;
              out["points"] = points;
              out["slope"] = r.slope;
              out["slope_stderr"] = r.slope_stderr;
              out["intercept"] = r.intercept;
              out["C_estimate"] = r.constant;
              out["xi_moment"] = r.xi_moment;
              return out;
          },
          py::arg("channel") = "drift", py::arg("p") = 2.0, py::arg("n_mc") = 10000,
          py::arg("epsilons") = py::none(), py::arg("T") = py::none(), py::arg("dt") = py::none(),
          py::arg("base") = "lipschitz_ou", py::arg("seed") = 0);

    m.def("_run",
          [](const std::string& config, bool force) {
              nlohmann::json parsed;
              try {
                  parsed = nlohmann::json::parse(config);
              } catch (const nlohmann::json::parse_error& e) {
                  throw Error(ErrorKind::ConfigParseError, e.what());
              }
              const RunConfig cfg = parse_config(parsed);
              RunResult r;
              {
                  py::gil_scoped_release release;
                  r = run(cfg, force);
              }
              return py::make_tuple(r.directory.string(), from_json(r.report));
          },
          py::arg("config"), py::arg("force") = false);
}
