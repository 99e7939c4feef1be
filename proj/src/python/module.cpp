#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "plight/agent/model.hpp"
#include "plight/analytics/analytics.hpp"
#include "plight/analytics/pca.hpp"
#include "plight/errors.hpp"
#include "plight/harness/config.hpp"
#include "plight/harness/experiments.hpp"
#include "plight/nn/checkpoint.hpp"
#include "plight/sim/flow.hpp"
#include "plight/sim/simulator.hpp"
#include "plight/transfer/similarity.hpp"

namespace py = pybind11;
using namespace plight;

namespace {

sim::FlowSpec flow_arg(const py::object& flow) {
  if (py::isinstance<sim::FlowSpec>(flow)) return flow.cast<sim::FlowSpec>();
  const auto name = flow.cast<std::string>();
  if (auto f = sim::find_builtin_flow(name)) return *f;
  return sim::load_flow_spec(name);
}

py::array_t<double> observations_array(const std::vector<sim::Observation>& obs) {
  py::array_t<double> out({obs.size(), static_cast<std::size_t>(sim::kObservationSize)});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (int j = 0; j < sim::kObservationSize; ++j) m(i, j) = obs[i].values[j];
  }
  return out;
}

sim::Observation observation_arg(const std::vector<double>& v) {
  if (v.size() != static_cast<std::size_t>(sim::kObservationSize)) {
    throw ShapeError("observation needs " + std::to_string(sim::kObservationSize) + " values");
  }
  sim::Observation o;
  std::copy(v.begin(), v.end(), o.values.begin());
  return o;
}

py::dict metrics_dict(const sim::EpisodeMetrics& m) {
  py::dict d;
  d["m_tt"] = m.m_tt;
  d["m_th"] = m.m_th;
  d["m_q"] = m.m_q;
  d["spawned"] = m.spawned;
  return d;
}

py::list records_list(const std::vector<harness::RunRecord>& records) {
  py::list out;
  for (const auto& r : records) {
    py::dict d;
    d["flow"] = r.flow;
    d["method"] = r.method;
    d["seed"] = r.seed;
    d["m_tt"] = r.m_tt_series();
    if (r.ar_pe) {
      d["ar"] = r.ar_pe->ar;
      d["pe"] = r.ar_pe->pe;
    }
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_plight, m) {
  m.doc() = "Bindings for the plight traffic signal control library";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<ContractError>(m, "ContractError", base);
  py::register_exception<StateError>(m, "StateError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<CompatibilityError>(m, "CompatibilityError", base);

  py::class_<sim::FlowSpec>(m, "FlowSpec")
      .def_readonly("name", &sim::FlowSpec::name)
      .def_readonly("turn_probs", &sim::FlowSpec::turn_probs)
      .def_readonly("grid", &sim::FlowSpec::grid)
      .def_property_readonly("phases",
                             [](const sim::FlowSpec& f) {
                               std::vector<std::pair<double, double>> out;
                               for (const auto& p : f.phases) out.emplace_back(p.duration_s, p.entry_interval_s);
                               return out;
                             })
      .def("expected_spawns", &sim::FlowSpec::expected_spawns, py::arg("entries"))
      .def("to_text", [](const sim::FlowSpec& f) { return sim::format_flow_spec(f); })
      .def("__repr__", [](const sim::FlowSpec& f) { return "<FlowSpec " + f.name + ">"; });

  m.def("builtin_flows", [] {
    std::vector<std::string> names;
    for (const auto& f : sim::builtin_flows()) names.push_back(f.name);
    return names;
  });
  m.def("flow", &flow_arg, py::arg("name_or_path"), "Built-in flow by name, else a flow file.");
  m.def("parse_flow", [](const std::string& text) { return sim::parse_flow_spec(text); }, py::arg("text"));
  m.def("published_vehicle_count", &sim::published_vehicle_count, py::arg("name"));
  m.def(
      "count_spawns",
      [](int rows, int cols, const py::object& flow, std::uint64_t seed) {
        return sim::count_spawns(sim::build_grid(rows, cols, 30.0), flow_arg(flow), seed);
      },
      py::arg("rows"), py::arg("cols"), py::arg("flow"), py::arg("seed"));

  py::class_<sim::Simulator>(m, "Simulator")
      .def(py::init([](int rows, int cols, const py::object& flow, std::uint64_t seed) {
             return sim::Simulator(sim::build_grid(rows, cols, 30.0), flow_arg(flow), seed);
           }),
           py::arg("rows"), py::arg("cols"), py::arg("flow"), py::arg("seed") = 1)
      .def("reset", py::overload_cast<>(&sim::Simulator::reset))
      .def(
          "step",
          [](sim::Simulator& s, const std::vector<int>& actions) {
            auto r = s.step(actions);
            return py::make_tuple(observations_array(r.observations), r.rewards, r.done);
          },
          py::arg("actions"), "Returns (observations, rewards, done).")
      .def("observations", [](const sim::Simulator& s) { return observations_array(s.observations()); })
      .def("rewards", &sim::Simulator::rewards)
      .def("done", &sim::Simulator::done)
      .def("metrics", [](const sim::Simulator& s) { return metrics_dict(s.metrics()); })
      .def("counts",
           [](const sim::Simulator& s) {
             const auto c = s.counts();
             py::dict d;
             d["spawned"] = c.spawned;
             d["on_links"] = c.on_links;
             d["queued"] = c.queued;
             d["exited"] = c.exited;
             return d;
           })
      .def("neighbors", [](const sim::Simulator& s, int i) { return s.network().intersections.at(i).neighbors; })
      .def_property_readonly("intersections", [](const sim::Simulator& s) { return s.network().size(); })
      .def_property_readonly("time", &sim::Simulator::time);

  py::class_<agent::AgentModel>(m, "Agent")
      .def_static(
          "load", [](const std::string& path) { return agent::AgentModel::from_checkpoint(nn::Checkpoint::load(path)); },
          py::arg("path"))
      .def_readonly("source_flow", &agent::AgentModel::source_flow)
      .def_readonly("gradient_steps", &agent::AgentModel::gradient_steps)
      .def_property_readonly("has_decoder", [](const agent::AgentModel& a) { return a.live.decoder.has_value(); })
      .def(
          "q_values",
          [](const agent::AgentModel& a, const std::vector<double>& obs,
             const std::vector<std::vector<double>>& neighbors) {
            std::vector<sim::Observation> nb;
            for (const auto& n : neighbors) nb.push_back(observation_arg(n));
            return agent::q_values(a.live, agent::encode(a.live, observation_arg(obs), nb));
          },
          py::arg("obs"), py::arg("neighbors") = std::vector<std::vector<double>>{});

  m.def("cnt_entropy", [](const std::vector<double>& p) { return analytics::cnt_entropy(p); }, py::arg("p"));
  m.def("flow_density", &analytics::flow_density, py::arg("vehicles"), py::arg("lanes"));
  m.def(
      "route_feature",
      [](const std::string& turns, double beta, double t_start) {
        const auto f = analytics::route_feature(turns, beta, t_start);
        return py::make_tuple(f.v_turn, f.t_start);
      },
      py::arg("turns"), py::arg("beta") = analytics::kDefaultRouteDiscount, py::arg("t_start") = 0.0,
      "Turns as 'S|L|R' text; returns (v_turn, t_start).");
  m.def(
      "pca",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> data, std::size_t components) {
        if (data.ndim() != 2) throw ShapeError("pca expects a 2-D array");
        const auto rows = static_cast<std::size_t>(data.shape(0));
        const auto cols = static_cast<std::size_t>(data.shape(1));
        nn::Matrix x(rows, cols);
        auto v = data.unchecked<2>();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) x(r, c) = v(r, c);
        }
        analytics::PcaOptions opt;
        opt.components = components;
        const auto res = analytics::pca(x, opt);
        auto to_array = [](const nn::Matrix& mat) {
          py::array_t<double> out({mat.rows(), mat.cols()});
          auto o = out.mutable_unchecked<2>();
          for (std::size_t r = 0; r < mat.rows(); ++r) {
            for (std::size_t c = 0; c < mat.cols(); ++c) o(r, c) = mat(r, c);
          }
          return out;
        };
        py::dict d;
        d["mean"] = res.mean;
        d["components"] = to_array(res.components);
        d["eigenvalues"] = res.eigenvalues;
        d["explained"] = res.explained;
        d["projected"] = to_array(res.projected);
        d["rank_deficient"] = res.rank_deficient;
        return d;
      },
      py::arg("data"), py::arg("components") = 3);

  m.def("guide_distribution", [](const std::vector<double>& w) { return transfer::guide_distribution(w); },
        py::arg("weights"));
  m.def("temporal_weight", [](const std::vector<double>& d, double lambda) { return transfer::temporal_weight(d, lambda); },
        py::arg("distances"), py::arg("lambda_") = 0.95);

  m.def(
      "run",
      [](const std::string& config_path, long long seed_offset) {
        auto config = harness::load_experiment_config(config_path);
        harness::apply_seed_offset(config, seed_offset);
        py::gil_scoped_release release;
        std::vector<harness::RunRecord> records;
        switch (config.mode) {
          case harness::Mode::kPretrain: records = harness::run_pretrain(config); break;
          case harness::Mode::kTransfer: records = harness::run_transfer(config); break;
          case harness::Mode::kAblation: records = harness::run_ablation(config); break;
          case harness::Mode::kAnalyze: throw ConfigError("use analyze() for analyze mode");
        }
        py::gil_scoped_acquire acquire;
        return records_list(records);
      },
      py::arg("config"), py::arg("seed_offset") = 0, "Runs a pretrain, transfer or ablation config.");
  m.def(
      "analyze",
      [](const std::string& flows_dir, const std::string& out_dir) {
        py::list out;
        for (const auto& r : harness::run_analyze(flows_dir, out_dir)) {
          py::dict d;
          d["flow"] = r.flow;
          d["E_rho"] = r.e_rho;
          d["H"] = r.h;
          out.append(d);
        }
        return out;
      },
      py::arg("flows_dir"), py::arg("out_dir"));
}
