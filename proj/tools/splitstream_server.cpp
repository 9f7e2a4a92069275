// Split server: accept client streams, assemble the feature set and train the
// server-side layers.
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "splitstream/errors.hpp"
#include "splitstream/harness.hpp"
#include "splitstream/server.hpp"

namespace fs = std::filesystem;
using namespace splitstream;

int main(int argc, char** argv) {
  CLI::App app{"splitstream server"};
  std::string listen = "127.0.0.1:7070";
  fs::path config_path, out_dir = "server_out";
  std::size_t expect_clients = 3;
  std::size_t wait_s = 600;
  app.add_option("--listen", listen, "host:port to bind (port 0 picks a free one)");
  app.add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--expect-clients", expect_clients, "client ids 0..n-1 must all finish");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--wait", wait_s, "seconds to wait for all clients");
  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig config = load_config(config_path);
    const ModelSpec spec = build_experiment_model(config);
    const SplitModel split = split_model(spec);

    ServerOptions options;
    options.config_hash = split.config_hash;
    for (std::uint32_t id = 0; id < expect_clients; ++id) options.expected_clients.insert(id);
    options.queue_capacity = config.queue_capacity;
    options.ack_interval = config.ack_interval;
    options.idle_timeout = Millis(config.idle_timeout_ms);

    const auto [host, port] = parse_endpoint(listen);
    TcpListener listener(host, port);
    std::cout << "listening on " << host << ':' << listener.port() << std::endl;
    SplitServer server(options);
    server.serve(listener);
    const AssembledDataset data = server.collect(std::chrono::seconds(wait_s));
    server.stop();
    for (const auto& e : server.session_errors()) std::clog << "session: " << e << '\n';
    std::cout << "assembled " << data.size() << " records" << std::endl;

    TrainState state(split.server_part, training_options(config, spec));
    train_server_model(state, data);

    fs::create_directories(out_dir);
    {
      std::ofstream out(out_dir / "epochs.csv");
      out << "epoch,loss,accuracy\n";
      for (const auto& e : state.log) {
        out << e.epoch << ',' << format_number(e.loss) << ','
            << (e.accuracy ? format_number(*e.accuracy) : std::string()) << '\n';
      }
    }
    {
      std::ofstream out(out_dir / "manifest.csv");
      out << "index,client_id,sample_id\n";
      for (std::size_t i = 0; i < data.size(); ++i) {
        out << i << ',' << data.provenance[i].first << ',' << data.provenance[i].second << '\n';
      }
    }
    ModelSpec trained = spec;
    std::vector<Layer> layers(split.client_part.layers());
    layers.insert(layers.end(), state.network.layers().begin(), state.network.layers().end());
    trained.network = Network(spec.network.input_shape(), layers);
    save_weights(out_dir / "weights.bin", trained);
    std::cout << "final loss " << format_number(state.log.back().loss) << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
