#include "plight/harness/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "plight/analytics/pca.hpp"
#include "plight/errors.hpp"
#include "plight/harness/report.hpp"
#include "plight/kv.hpp"
#include "plight/plot.hpp"

namespace plight::harness {

namespace fs = std::filesystem;

ArPe compute_ar_pe(std::span<const double> series) {
  if (series.size() < 3) throw ContractError("ar/pe need at least 3 episodes");
  ArPe out;
  for (std::size_t e = 1; e < series.size(); ++e) out.ar += 0.5 * (series[e - 1] + series[e]);
  out.pe = series[2];
  return out;
}

std::vector<double> RunRecord::m_tt_series() const {
  std::vector<double> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) out.push_back(e.metrics.m_tt);
  return out;
}

double RunRecord::tail_mean(std::size_t n) const {
  if (episodes.empty()) throw ContractError("run has no episodes");
  const std::size_t k = std::min(n, episodes.size());
  double sum = 0.0;
  for (std::size_t e = episodes.size() - k; e < episodes.size(); ++e) sum += episodes[e].metrics.m_tt;
  return sum / static_cast<double>(k);
}

double RunRecord::head_mean(std::size_t n) const {
  if (episodes.empty()) throw ContractError("run has no episodes");
  const std::size_t k = std::min(n, episodes.size());
  double sum = 0.0;
  for (std::size_t e = 0; e < k; ++e) sum += episodes[e].metrics.m_tt;
  return sum / static_cast<double>(k);
}

RunRecord make_record(std::string flow, std::string method, std::uint64_t seed,
                      std::vector<agent::EpisodeLog> episodes) {
  RunRecord r;
  r.flow = std::move(flow);
  r.method = std::move(method);
  r.seed = seed;
  r.episodes = std::move(episodes);
  const auto series = r.m_tt_series();
  if (series.size() >= 3) r.ar_pe = compute_ar_pe(series);
  return r;
}

sim::FlowSpec resolve_config_flow(const ExperimentConfig& config, const std::string& name) {
  if (auto f = sim::find_builtin_flow(name)) return *f;
  const std::string path = config.resolve(name);
  if (!fs::exists(path)) throw ConfigError("flow '" + name + "' is neither built in nor a file (" + path + ")");
  try {
    return sim::load_flow_spec(path);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

agent::EnvConfig make_env(const ExperimentConfig& config, const sim::FlowSpec& flow, std::uint64_t seed) {
  agent::EnvConfig env;
  env.rows = config.rows;
  env.cols = config.cols;
  env.free_flow_s = config.free_flow_s;
  env.flow = flow;
  env.sim = config.sim;
  env.traffic_seed = mix_seed(seed, config.traffic_stream);
  try {
    env.flow.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  // A shorter horizon simulates a prefix of the demand.
  if (env.sim.horizon_s > sim::kEpisodeHorizonS) {
    throw ConfigError("horizon exceeds the " + format_double(sim::kEpisodeHorizonS) + " s covered by flow specs");
  }
  return env;
}

PretrainOutcome pretrain_one(const ExperimentConfig& config, const sim::FlowSpec& flow, std::uint64_t seed,
                             bool with_decoder, const std::string& method, const agent::EpisodeCallback& on_episode) {
  agent::ModelConfig mc = config.model;
  mc.with_decoder = with_decoder;
  auto result = agent::pretrain(make_env(config, flow, seed), mc, config.train, config.episodes, seed, on_episode);
  PretrainOutcome out;
  out.record = make_record(flow.name, method, seed, std::move(result.episodes));
  out.model = std::move(result.model);
  return out;
}

TransferOutcome transfer_one(const ExperimentConfig& config, const std::vector<transfer::SourceModel>& sources,
                             const sim::FlowSpec& flow, std::uint64_t seed, const agent::EpisodeCallback& on_episode) {
  transfer::AgentPool pool(sources, {});
  TransferOutcome out;
  out.result = transfer::transfer_train(pool, make_env(config, flow, seed), config.train, config.transfer,
                                        config.episodes, seed, on_episode);
  std::vector<agent::EpisodeLog> logs;
  for (const auto& e : out.result.episodes) logs.push_back(e.log);
  out.record = make_record(flow.name, "PRLight", seed, std::move(logs));
  return out;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::size_t next = 0;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next == n) return;
          i = next++;
        }
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

std::string run_dir(const ExperimentConfig& config, const std::string& method, const std::string& flow,
                    std::uint64_t seed) {
  return (fs::path(config.resolve(config.output)) / method / flow / ("seed" + std::to_string(seed))).string();
}

// Collects optional per-episode traces while a run is in progress.
struct TraceSink {
  bool enabled = false;
  std::ostringstream steps;
  std::string vehicles;

  agent::EpisodeCallback callback() {
    if (!enabled) return {};
    sim::write_step_trace_header(steps);
    return [this](int episode, const sim::Simulator& s) {
      sim::write_step_trace(steps, episode, s);
      std::ostringstream v;
      sim::write_vehicle_trace(v, s.vehicles());
      vehicles = v.str();
    };
  }

  void write(const std::string& dir) const {
    if (!enabled) return;
    write_text_file(dir + "/step_trace.csv", steps.str());
    write_text_file(dir + "/vehicle_trace.csv", vehicles);
  }
};

void write_run(const std::string& dir, const RunRecord& record) {
  std::ostringstream log;
  agent::write_training_log(log, record.episodes);
  write_text_file(dir + "/train_log.csv", log.str());
}

void write_checkpoint(const std::string& dir, const agent::AgentModel& model) {
  fs::create_directories(dir);
  model.to_checkpoint().save(dir + "/checkpoint.json");
}

void finish(const ExperimentConfig& config, const std::vector<RunRecord>& records, const std::string& title) {
  const std::string out = config.resolve(config.output);
  std::ostringstream summary;
  write_summary_csv(summary, records);
  write_text_file(out + "/summary.csv", summary.str());
  std::ostringstream svg;
  write_learning_curves_svg(svg, title, records);
  write_text_file(out + "/learning_curves.svg", svg.str());
  write_text_file(out + "/config.txt", config.to_text());
}

std::vector<transfer::ManifestEntry> resolved_manifest(const ExperimentConfig& config) {
  const std::string path = config.resolve(config.pool);
  if (!fs::exists(path)) throw ConfigError("pool manifest '" + path + "' not found");
  std::vector<transfer::ManifestEntry> entries;
  try {
    entries = transfer::load_pool_manifest(path);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  const fs::path dir = fs::path(path).parent_path();
  for (auto& e : entries) {
    if (!fs::path(e.path).is_absolute()) e.path = (dir / e.path).lexically_normal().string();
  }
  return entries;
}

void require_mode(const ExperimentConfig& config, Mode mode) {
  if (config.mode != mode) {
    throw ConfigError(std::string("config mode is '") + mode_name(config.mode) + "', expected '" + mode_name(mode) + "'");
  }
}

}  // namespace

std::vector<RunRecord> run_pretrain(const ExperimentConfig& config) {
  require_mode(config, Mode::kPretrain);
  config.validate();
  std::vector<sim::FlowSpec> flows;
  for (const auto& f : config.flows) flows.push_back(resolve_config_flow(config, f));
  const std::size_t jobs = flows.size() * config.seeds.size();
  std::vector<RunRecord> records(jobs);
  parallel_for(jobs, config.threads, [&](std::size_t j) {
    const auto& flow = flows[j / config.seeds.size()];
    const std::uint64_t seed = config.seeds[j % config.seeds.size()];
    TraceSink traces;
    traces.enabled = config.write_traces;
    auto outcome = pretrain_one(config, flow, seed, true, "PLight", traces.callback());
    const std::string dir = run_dir(config, "PLight", flow.name, seed);
    write_run(dir, outcome.record);
    write_checkpoint(dir, outcome.model);
    traces.write(dir);
    records[j] = std::move(outcome.record);
  });
  finish(config, records, "source pretraining");
  return records;
}

std::vector<RunRecord> run_transfer(const ExperimentConfig& config) {
  require_mode(config, Mode::kTransfer);
  config.validate();
  const auto flow = resolve_config_flow(config, config.flows.front());
  const auto manifest = resolved_manifest(config);
  const std::size_t per_seed = config.baseline ? 2 : 1;
  std::vector<RunRecord> records(config.seeds.size() * per_seed);
  parallel_for(records.size(), config.threads, [&](std::size_t j) {
    const std::uint64_t seed = config.seeds[j / per_seed];
    TraceSink traces;
    traces.enabled = config.write_traces;
    if (j % per_seed == 0) {
      const auto sources = transfer::load_sources(manifest, seed, sim::kObservationSize);
      auto outcome = transfer_one(config, sources, flow, seed, traces.callback());
      const std::string dir = run_dir(config, "PRLight", flow.name, seed);
      write_run(dir, outcome.record);
      write_checkpoint(dir, outcome.result.target);
      std::ostringstream log;
      transfer::write_transfer_log(log, outcome.result.events);
      write_text_file(dir + "/transfer_log.csv", log.str());
      std::ostringstream sel;
      sel << "episode";
      for (const auto& e : manifest) sel << ',' << e.flow;
      sel << ",target\n";
      for (const auto& e : outcome.result.episodes) {
        sel << e.log.episode;
        for (double p : e.mean_selection) sel << ',' << format_double(p);
        sel << '\n';
      }
      write_text_file(dir + "/selection.csv", sel.str());
      traces.write(dir);
      records[j] = std::move(outcome.record);
    } else {
      auto outcome = pretrain_one(config, flow, seed, true, "PLight-scratch", traces.callback());
      const std::string dir = run_dir(config, "PLight-scratch", flow.name, seed);
      write_run(dir, outcome.record);
      write_checkpoint(dir, outcome.model);
      traces.write(dir);
      records[j] = std::move(outcome.record);
    }
  });
  finish(config, records, "transfer to " + flow.name);
  return records;
}

std::vector<RunRecord> run_ablation(const ExperimentConfig& config) {
  require_mode(config, Mode::kAblation);
  config.validate();
  std::vector<bool> variants;
  if (config.variant != AblationVariant::kEQ) variants.push_back(true);
  if (config.variant != AblationVariant::kEDQ) variants.push_back(false);
  std::vector<sim::FlowSpec> flows;
  for (const auto& f : config.flows) flows.push_back(resolve_config_flow(config, f));
  const std::size_t per_flow = config.seeds.size() * variants.size();
  std::vector<RunRecord> records(flows.size() * per_flow);
  parallel_for(records.size(), config.threads, [&](std::size_t j) {
    const auto& flow = flows[j / per_flow];
    const std::size_t r = j % per_flow;
    const std::uint64_t seed = config.seeds[r / variants.size()];
    const bool with_decoder = variants[r % variants.size()];
    const std::string method = with_decoder ? "EDQ" : "EQ";
    TraceSink traces;
    traces.enabled = config.write_traces;
    auto outcome = pretrain_one(config, flow, seed, with_decoder, method, traces.callback());
    const std::string dir = run_dir(config, method, flow.name, seed);
    write_run(dir, outcome.record);
    write_checkpoint(dir, outcome.model);
    traces.write(dir);
    records[j] = std::move(outcome.record);
  });
  finish(config, records, "decoder ablation");
  return records;
}

int fixed_cycle_phase(int step, int hold) {
  if (hold < 1) throw ContractError("phase hold must be positive");
  return (step / hold) % sim::kNumPhases;
}

std::vector<analytics::EntropyReport> run_analyze(const std::string& flows_dir, const std::string& out_dir,
                                                  double route_discount, const ExperimentConfig* config) {
  std::vector<std::pair<sim::FlowSpec, std::string>> flows;  // flow, optional trace path
  if (flows_dir == "builtin") {
    for (const auto& f : sim::builtin_flows()) flows.emplace_back(f, "");
  } else {
    if (!fs::is_directory(flows_dir)) throw ConfigError("flows directory '" + flows_dir + "' not found");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(flows_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".flow") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no .flow files in '" + flows_dir + "'");
    for (const auto& p : files) {
      sim::FlowSpec spec;
      try {
        spec = sim::load_flow_spec(p.string());
      } catch (const ParseError& e) {
        throw ConfigError(e.what());
      }
      fs::path trace = p;
      trace.replace_extension(".trace.csv");
      flows.emplace_back(std::move(spec), fs::exists(trace) ? trace.string() : "");
    }
  }

  const std::uint64_t seed = config ? config->seeds.front() : 1;
  std::vector<analytics::EntropyReport> reports;
  std::ostringstream pca_summary;
  pca_summary << "flow,vehicles,explained_1,explained_2,explained_3,rank_deficient\n";
  for (const auto& [flow, given_trace] : flows) {
    int rows = config ? config->rows : 2;
    int cols = config ? config->cols : 2;
    if (flow.grid) std::tie(rows, cols) = *flow.grid;
    std::string trace_path = given_trace;
    if (trace_path.empty()) {
      sim::SimConfig sc = config ? config->sim : sim::SimConfig{};
      sim::Simulator s(sim::build_grid(rows, cols, config ? config->free_flow_s : 30.0), flow,
                       mix_seed(seed, 1), sc);
      std::vector<int> actions(s.network().size());
      while (!s.done()) {
        std::fill(actions.begin(), actions.end(), fixed_cycle_phase(s.step_index()));
        s.step(actions);
      }
      std::ostringstream trace;
      sim::write_vehicle_trace(trace, s.vehicles());
      trace_path = out_dir + "/traces/" + flow.name + ".csv";
      write_text_file(trace_path, trace.str());
    }
    const auto records = analytics::load_vehicle_trace(trace_path);
    reports.push_back(analytics::flow_report(flow, static_cast<long long>(records.size()), rows * cols));

    std::vector<analytics::TravelFeature> features;
    features.reserve(records.size());
    for (const auto& r : records) features.push_back(analytics::route_feature(r.turns, route_discount, r.spawn_time));
    std::ostringstream csv;
    csv << "vehicle_id,c1,c2,c3\n";
    pca_summary << flow.name << ',' << records.size();
    if (features.size() >= 4) {
      const auto pca = analytics::pca_project(features, 3);
      for (std::size_t i = 0; i < records.size(); ++i) {
        csv << records[i].vehicle_id;
        for (std::size_t c = 0; c < 3; ++c) {
          csv << ',';
          if (c < pca.projected.cols()) csv << format_double(pca.projected(i, c));
        }
        csv << '\n';
      }
      for (std::size_t c = 0; c < 3; ++c) {
        pca_summary << ',';
        if (c < pca.explained.size()) pca_summary << format_double(pca.explained[c]);
      }
      pca_summary << ',' << (pca.rank_deficient ? 1 : 0) << '\n';
      std::vector<double> x(records.size(), 0.0), y(records.size(), 0.0);
      for (std::size_t i = 0; i < records.size(); ++i) {
        if (pca.projected.cols() > 0) x[i] = pca.projected(i, 0);
        if (pca.projected.cols() > 1) y[i] = pca.projected(i, 1);
      }
      std::ostringstream svg;
      write_scatter_svg(svg, "route features of " + flow.name, "component 1", "component 2", x, y);
      write_text_file(out_dir + "/pca_" + flow.name + ".svg", svg.str());
    } else {
      pca_summary << ",,,1\n";
    }
    write_text_file(out_dir + "/pca_" + flow.name + ".csv", csv.str());
  }
  std::ostringstream table;
  analytics::write_analytics_csv(table, reports);
  write_text_file(out_dir + "/analytics.csv", table.str());
  write_text_file(out_dir + "/pca_summary.csv", pca_summary.str());
  return reports;
}

CheckReport check_records(const ExperimentConfig& config, std::span<const RunRecord> records) {
  CheckReport rep;
  auto need = [&](std::size_t n) {
    return static_cast<std::size_t>(std::ceil(config.check_fraction * static_cast<double>(n) - 1e-9));
  };
  switch (config.mode) {
    case Mode::kPretrain: {
      std::size_t ok = 0;
      for (const auto& r : records) {
        const bool improved = r.episodes.size() >= 2 && r.tail_mean(5) < r.head_mean(5);
        ok += improved;
        rep.lines.push_back(r.flow + " seed " + std::to_string(r.seed) + ": first-5 mean " +
                            format_double(r.episodes.empty() ? 0.0 : r.head_mean(5)) +
                            ", final-5 mean " + format_double(r.episodes.empty() ? 0.0 : r.tail_mean(5)) +
                            (improved ? " improved" : " not improved"));
      }
      rep.passed = ok >= need(records.size());
      break;
    }
    case Mode::kTransfer: {
      std::size_t pairs = 0, ok = 0;
      for (const auto& a : records) {
        if (a.method != "PRLight") continue;
        for (const auto& b : records) {
          if (b.method != "PLight-scratch" || b.seed != a.seed) continue;
          ++pairs;
          const bool win = a.ar_pe && b.ar_pe && a.ar_pe->pe < b.ar_pe->pe && a.ar_pe->ar < b.ar_pe->ar;
          ok += win;
          rep.lines.push_back("seed " + std::to_string(a.seed) + ": PRLight pe/ar " +
                              (a.ar_pe ? format_double(a.ar_pe->pe) + "/" + format_double(a.ar_pe->ar) : "-") +
                              " vs scratch " +
                              (b.ar_pe ? format_double(b.ar_pe->pe) + "/" + format_double(b.ar_pe->ar) : "-") +
                              (win ? " win" : " loss"));
        }
      }
      if (pairs == 0) rep.lines.push_back("no paired baseline runs (set baseline = 1)");
      rep.passed = pairs > 0 && ok >= need(pairs);
      break;
    }
    case Mode::kAblation: {
      double edq = 0.0, eq = 0.0;
      std::size_t n_edq = 0, n_eq = 0;
      for (const auto& r : records) {
        if (r.method == "EDQ") edq += r.tail_mean(5), ++n_edq;
        if (r.method == "EQ") eq += r.tail_mean(5), ++n_eq;
      }
      if (n_edq == 0 || n_eq == 0) {
        rep.lines.push_back("ablation check needs both variants");
        rep.passed = false;
        break;
      }
      edq /= static_cast<double>(n_edq);
      eq /= static_cast<double>(n_eq);
      const double gap = std::abs(edq - eq) / eq;
      rep.lines.push_back("final-5 m_tt EDQ " + format_double(edq) + ", EQ " + format_double(eq) +
                          ", relative gap " + format_double(gap));
      rep.passed = gap <= config.ablation_tolerance;
      break;
    }
    case Mode::kAnalyze:
      rep.passed = true;
      break;
  }
  return rep;
}

}  // namespace plight::harness
