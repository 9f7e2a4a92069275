// Client-side process: load local data, run the frozen privacy layer and
// stream the feature maps to a split server.
#include <iostream>

#include <CLI11.hpp>

#include "splitstream/client.hpp"
#include "splitstream/errors.hpp"
#include "splitstream/harness.hpp"

namespace fs = std::filesystem;
using namespace splitstream;

int main(int argc, char** argv) {
  CLI::App app{"splitstream client"};
  std::string server;
  std::uint32_t client_id = 0;
  fs::path config_path, data_path;
  double noise_sigma = 0.0;
  std::optional<std::uint64_t> seed;
  app.add_option("--server", server, "host:port of the split server")->required();
  app.add_option("--client-id", client_id)->required();
  app.add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--data", data_path, "image directory or cholesterol CSV")->required()->check(CLI::ExistingPath);
  app.add_option("--noise-sigma", noise_sigma, "Gaussian noise added to the feature maps");
  app.add_option("--seed", seed, "experiment seed (overrides the config; must match the server)");
  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig config = load_config(config_path);
    if (seed) config.seed = *seed;
    config.source = fs::is_directory(data_path) ? DataSource::kImageDir : DataSource::kCsv;
    config.data_path = data_path;
    const ModelSpec spec = build_experiment_model(config);
    const SplitModel split = split_model(spec);
    if (split.client_part.empty()) {
      std::clog << "warning: split_index 0 sends raw inputs to the server (no privacy layer)\n";
    }
    std::vector<Sample> samples = load_experiment_data(config, spec.network.input_shape());
    if (config.source == DataSource::kCsv) apply_zscore(fit_zscore(samples), samples);

    const auto records = privacy_forward_all(split.client_part, samples, client_id, noise_sigma,
                                             derive_seed(config.seed, client_id));
    const auto [host, port] = parse_endpoint(server);
    ClientOptions options;
    options.client_id = client_id;
    options.config_hash = split.config_hash;
    options.timeout = Millis(config.idle_timeout_ms);
    const ClientSummary summary = run_client(
        options, records, [&, host = host, port = port] { return tcp_connect(host, port, options.timeout); });
    std::cout << "records_sent " << summary.records_sent << " bytes_sent " << summary.bytes_sent
              << " reconnects " << summary.reconnects << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
