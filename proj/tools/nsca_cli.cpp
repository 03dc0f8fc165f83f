// Command-line front end: extract, synth, eval, sweep.
//
// Exit codes: 0 success, 1 invalid input (files, configuration, arguments),
// 2 failure while processing. Failures print a JSON error object on stderr.

#include "nsca/error.hpp"
#include "nsca/evaluation.hpp"
#include "nsca/io.hpp"
#include "nsca/pipeline.hpp"
#include "nsca/random.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nsca::io::Json;

namespace {

constexpr int kInputError = 1;
constexpr int kProcessingError = 2;

struct Failure {
  int code;
  std::string kind;
  std::string message;
};

// Runs one stage and converts library errors into a Failure with `code`.
std::optional<Failure> stage(int code, const std::function<void()>& body) {
  try {
    body();
    return std::nullopt;
  } catch (const nsca::Error& e) {
    return Failure{code, std::string(nsca::to_string(e.kind())), e.what()};
  } catch (const std::exception& e) {
    return Failure{code, code == kInputError ? "ParseError" : "InternalError",
                   e.what()};
  }
}

int report(const Failure& f) {
  std::cerr << nsca::io::error_to_json(f.kind, f.message).dump() << '\n';
  return f.code;
}

std::string column_name(const char* prefix, std::size_t k) {
  return prefix + std::to_string(k);
}

void write_plotdata(const fs::path& dir, const nsca::MultichannelSignal& x,
                    const nsca::FetalEpochs& fe) {
  fs::create_directories(dir);
  for (const auto& tr : fe.traces) {
    struct Column {
      const char* name;
      const std::vector<double>* data;
    };
    const std::vector<Column> all = {
        {"mecg", &tr.mecg},
        {"innovation", &tr.innovation.values},
        {"predicted_variance", &tr.innovation.predicted_variance},
        {"rho", &tr.rho},
        {"a", &tr.a},
        {"gamma", &tr.gamma},
        {"q", &tr.q},
        {"eps", &tr.eps}};
    std::vector<Column> cols;
    for (const auto& c : all) {
      if (!c.data->empty()) cols.push_back(c);
    }
    const fs::path file = dir / ("channel_" + std::to_string(tr.channel) + ".csv");
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw nsca::Error(nsca::ErrorKind::IoError, "cannot write " + file.string());
    }
    out << "# fs=" << nsca::io::format_double(x.fs())
        << " format_version=" << nsca::io::kFormatVersion << '\n';
    out << "x";
    for (const auto& c : cols) out << ',' << c.name;
    out << '\n';
    const auto s = x.channel(tr.channel);
    std::string row;
    for (std::size_t t = 0; t < s.size(); ++t) {
      row = nsca::io::format_double(s[t]);
      for (const auto& c : cols) {
        row += ',';
        row += nsca::io::format_double((*c.data)[t]);
      }
      row += '\n';
      out << row;
    }
    std::ofstream kout(dir / ("kernels_channel_" + std::to_string(tr.channel) + ".txt"),
                       std::ios::binary | std::ios::trunc);
    nsca::io::write_kernels(kout, tr.kernels.kernels);
  }
}

int run_extract(const std::string& input, const std::string& config,
                const std::string& out_dir) {
  std::optional<nsca::io::Recording> rec;
  nsca::io::RunConfig cfg;
  if (auto f = stage(kInputError, [&] {
        rec = nsca::io::read_recording(fs::path(input));
        if (!config.empty()) {
          cfg = nsca::io::run_config_from_json(nsca::io::read_json(config));
        }
        cfg.pipeline.validate(rec->signal.channels());
      })) {
    return report(*f);
  }
  if (auto f = stage(kProcessingError, [&] {
        const nsca::MultichannelSignal& x = rec->signal;
        const nsca::SeparationOutput out = nsca::run_nsca(x, cfg.pipeline);
        const fs::path dir(out_dir);
        fs::create_directories(dir);

        std::vector<std::string> names;
        for (std::size_t k = 0; k < x.channels(); ++k) {
          names.push_back(column_name("y", k));
        }
        nsca::io::write_recording(dir / "components.csv", out.components, names);
        nsca::io::write_matrix(dir / "demixing.csv", out.demixing);
        nsca::io::write_json(dir / "epochs.json",
                             nsca::io::epochs_to_json(out.epochs.named(), x.fs()));

        Json ranking = Json::array();
        for (const auto& r : out.ranking) {
          ranking.push_back(Json{{"component", r.index}, {"score", r.score}});
        }
        Json eig = Json::array();
        for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i) {
          eig.push_back(out.eigenvalues(i));
        }
        nsca::io::write_json(
            dir / "ranking.json",
            Json{{"format_version", nsca::io::kFormatVersion},
                 {"mode", std::string(nsca::to_string(cfg.pipeline.mode))},
                 {"ranking", ranking},
                 {"eigenvalues", eig},
                 {"maternal_rpeaks", out.epochs.maternal_rpeaks},
                 {"warnings", out.warnings}});
        write_plotdata(dir / "plotdata", x, out.epochs);
      })) {
    return report(*f);
  }
  return 0;
}

int run_synth(const std::string& config, const std::string& out_path,
              const std::string& truth_path, std::optional<std::uint64_t> seed) {
  nsca::io::SynthConfig cfg;
  if (auto f = stage(kInputError, [&] {
        if (!config.empty()) {
          cfg = nsca::io::synth_config_from_json(nsca::io::read_json(config));
        }
        if (seed) cfg.seed = *seed;
        cfg.mixture.seed = nsca::derive_seed(cfg.seed, "synth.mixture");
        cfg.mixture.validate();
      })) {
    return report(*f);
  }
  if (auto f = stage(kProcessingError, [&] {
        const nsca::MixtureGroundTruth truth = nsca::generate_mixture(cfg.mixture);
        nsca::MultichannelSignal x = truth.observed;
        if (cfg.noise.snr_db) {
          x = nsca::add_noise(x, cfg.noise.kind, *cfg.noise.snr_db,
                              nsca::derive_seed(cfg.seed, "synth.noise"));
        }
        nsca::io::write_recording(fs::path(out_path), x);
        if (!truth_path.empty()) {
          nsca::io::write_json(truth_path, nsca::io::truth_to_json(truth));
        }
      })) {
    return report(*f);
  }
  return 0;
}

int run_eval(const std::string& est, const std::string& truth_path,
             const std::string& config, const std::string& out_path) {
  std::optional<nsca::io::Recording> rec;
  nsca::io::GroundTruth truth;
  nsca::io::RunConfig cfg;
  if (auto f = stage(kInputError, [&] {
        rec = nsca::io::read_recording(fs::path(est));
        truth = nsca::io::truth_from_json(nsca::io::read_json(truth_path));
        if (!config.empty()) {
          cfg = nsca::io::run_config_from_json(nsca::io::read_json(config));
        }
        if (truth.samples != 0 && truth.samples != rec->signal.samples()) {
          throw nsca::Error(nsca::ErrorKind::DimensionMismatch,
                            "components and truth differ in length");
        }
        if (truth.fs != rec->signal.fs()) {
          throw nsca::Error(nsca::ErrorKind::DimensionMismatch,
                            "components and truth differ in sampling rate");
        }
      })) {
    return report(*f);
  }
  if (auto f = stage(kProcessingError, [&] {
        const nsca::FetalSelection sel =
            nsca::select_fetal_channel(rec->signal, cfg.evaluation.fetal_min_rr);
        const nsca::MetricReport m = nsca::evaluate_peaks(
            sel.peaks, truth.fetal_rpeaks, truth.fs, cfg.evaluation.tolerance);
        const Json j = nsca::io::metrics_to_json(m, sel);
        if (out_path.empty()) {
          std::cout << j.dump(2) << '\n';
        } else {
          nsca::io::write_json(out_path, j);
        }
      })) {
    return report(*f);
  }
  return 0;
}

int run_sweep(const std::string& config, const std::string& out_path,
              std::string summary_path, std::optional<std::uint64_t> seed) {
  nsca::SweepConfig cfg;
  if (auto f = stage(kInputError, [&] {
        if (!config.empty()) {
          cfg = nsca::io::sweep_config_from_json(nsca::io::read_json(config));
        }
        if (seed) cfg.seed = *seed;
        cfg.validate();
      })) {
    return report(*f);
  }
  if (summary_path.empty()) {
    summary_path = fs::path(out_path).replace_extension(".json").string();
  }
  if (auto f = stage(kProcessingError, [&] {
        const nsca::SweepReport rep = nsca::snr_sweep(cfg);
        nsca::io::write_sweep_csv(out_path, rep, cfg.methods);
        nsca::io::write_json(summary_path, nsca::io::sweep_summary_to_json(rep));
      })) {
    return report(*f);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonstationary component analysis for fetal ECG extraction"};
  app.require_subcommand(1);

  std::string input, config, out_dir, out, truth, est, summary;
  std::uint64_t seed_value = 0;

  auto* extract = app.add_subcommand("extract", "Separate a recording");
  extract->add_option("--input", input, "Recording CSV")->required();
  extract->add_option("--config", config, "Run configuration JSON");
  extract->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic mixture");
  synth->add_option("--config", config, "Synthesis configuration JSON");
  synth->add_option("--out", out, "Recording CSV to write")->required();
  synth->add_option("--truth", truth, "Ground-truth JSON to write");
  auto* synth_seed = synth->add_option("--seed", seed_value, "Random seed");

  auto* eval = app.add_subcommand("eval", "Score extracted components");
  eval->add_option("--est", est, "Components CSV")->required();
  eval->add_option("--truth", truth, "Ground-truth JSON")->required();
  eval->add_option("--config", config, "Run configuration JSON");
  eval->add_option("--out", out, "Metrics JSON (default: stdout)");

  auto* sweep = app.add_subcommand("sweep", "Run the SNR sweep");
  sweep->add_option("--config", config, "Sweep configuration JSON");
  sweep->add_option("--out", out, "Per-trial report CSV")->required();
  sweep->add_option("--summary", summary, "Summary JSON (default: <out>.json)");
  auto* sweep_seed = sweep->add_option("--seed", seed_value, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report({kInputError, "ParseError", e.what()});
  }

  const auto maybe_seed = [&](CLI::Option* opt) -> std::optional<std::uint64_t> {
    if (opt->count() > 0) return seed_value;
    return std::nullopt;
  };
  if (extract->parsed()) return run_extract(input, config, out_dir);
  if (synth->parsed()) return run_synth(config, out, truth, maybe_seed(synth_seed));
  if (eval->parsed()) return run_eval(est, truth, config, out);
  if (sweep->parsed()) {
    return run_sweep(config, out, summary, maybe_seed(sweep_seed));
  }
  return kInputError;
}
