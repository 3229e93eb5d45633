// doremi-synth-adapter: the synthetic model behind the subprocess adapter
// protocol. Handy for exercising external-model runs end to end.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "doremi/adapter.hpp"
#include "doremi/error.hpp"

namespace fs = std::filesystem;
using namespace doremi;

namespace {

std::vector<entity_pair_key> read_negatives(const fs::path& path) {
  std::vector<entity_pair_key> out;
  std::ifstream in(path);
  if (!in) return out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("title").get<std::string>(), j.at("h_idx").get<int>(), j.at("t_idx").get<int>()});
    } catch (const nlohmann::json::exception& e) {
      throw parse_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic relation extractor (subprocess adapter protocol)"};
  std::string relations, train, predict, checkpoint_in, checkpoint_out, out, truth, model = "synthetic";
  int iteration = 0;
  synthetic_params params;
  synthetic_learning learning;
  app.add_option("--relations", relations)->required();
  app.add_option("--train", train)->required();
  app.add_option("--predict", predict)->required();
  app.add_option("--checkpoint-in", checkpoint_in, "empty when training from scratch");
  app.add_option("--checkpoint-out", checkpoint_out)->required();
  app.add_option("--out", out)->required();
  app.add_option("--truth", truth, "hidden labels for the prediction documents");
  app.add_option("--model", model);
  app.add_option("--iteration", iteration);
  app.add_option("--seed", params.seed);
  app.add_option("--confidence-mean", params.confidence_mean);
  app.add_option("--confidence-spread", params.confidence_spread);
  app.add_option("--flip-rate", params.flip_rate);
  app.add_option("--negative-flip-scale", params.negative_flip_scale);
  app.add_option("--learning-scale", learning.learning_scale);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    params.validate();
    const auto schema = relation_schema::load(relations);
    const auto train_corpus = load_corpus(train, split_tag::ha, schema);
    const auto targets = load_corpus(predict, split_tag::ds, schema);
    std::shared_ptr<const corpus> hidden;
    if (!truth.empty()) hidden = std::make_shared<const corpus>(load_corpus(truth, split_tag::ds, schema));
    const auto negatives = read_negatives(train + ".negatives.jsonl");

    adapter_request req;
    req.model = model;
    req.iteration = iteration;
    req.train = &train_corpus;
    req.negatives = negatives;
    req.targets = &targets;
    if (!checkpoint_in.empty()) req.checkpoint_in = checkpoint_in;
    req.checkpoint_out = checkpoint_out;
    req.predictions_out = out;
    synthetic_adapter(params, learning, hidden).run(req, schema);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
}
