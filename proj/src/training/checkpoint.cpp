#include "hypercaps/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hypercaps::training {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "HYPERCAPS-CHECKPOINT";

json metrics_to_json(const Metrics& m) {
  return json{{"precision", m.precision},
              {"recall", m.recall},
              {"f1", m.f1},
              {"tp", m.counts.tp},
              {"fp", m.counts.fp},
              {"fn", m.counts.fn},
              {"tn", m.counts.tn}};
}

Metrics metrics_from_json(const json& j) {
  Metrics m;
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.counts.tp = j.at("tp").get<std::size_t>();
  m.counts.fp = j.at("fp").get<std::size_t>();
  m.counts.fn = j.at("fn").get<std::size_t>();
  m.counts.tn = j.at("tn").get<std::size_t>();
  return m;
}

json config_to_json(const TrainConfig& c) {
  const auto& m = c.model;
  return json{{"mode", std::string(corpus::to_string(c.mode))},
              {"batch_size", c.batch_size},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"seed", c.seed},
              {"precision", std::string(to_string(c.precision))},
              {"adadelta", {{"rho", c.optimizer.rho}, {"epsilon", c.optimizer.epsilon}}},
              {"model",
               {{"vocab_size", m.vocab_size},
                {"embed_dim", m.embed_dim},
                {"hidden_dim", m.hidden_dim},
                {"capsule_dim", m.capsule_dim},
                {"routing_iterations", m.routing_iterations},
                {"attention",
                 {{"a", m.attention.a},
                  {"b", m.attention.b},
                  {"softmax", m.attention.apply_softmax},
                  {"trainable", m.attention.trainable}}},
                {"loss", {{"m_plus", m.loss.m_plus}, {"m_minus", m.loss.m_minus}, {"absent_weight", m.loss.absent_weight}}}}}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.mode = corpus::parse_token_mode(j.at("mode").get<std::string>());
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.precision = parse_precision(j.at("precision").get<std::string>());
  c.optimizer.rho = j.at("adadelta").at("rho").get<double>();
  c.optimizer.epsilon = j.at("adadelta").at("epsilon").get<double>();
  const auto& m = j.at("model");
  c.model.vocab_size = m.at("vocab_size").get<std::size_t>();
  c.model.embed_dim = m.at("embed_dim").get<std::size_t>();
  c.model.hidden_dim = m.at("hidden_dim").get<std::size_t>();
  c.model.capsule_dim = m.at("capsule_dim").get<std::size_t>();
  c.model.routing_iterations = m.at("routing_iterations").get<int>();
  const auto& a = m.at("attention");
  c.model.attention.a = a.at("a").get<double>();
  c.model.attention.b = a.at("b").get<double>();
  c.model.attention.apply_softmax = a.at("softmax").get<bool>();
  c.model.attention.trainable = a.at("trainable").get<bool>();
  const auto& l = m.at("loss");
  c.model.loss.m_plus = l.at("m_plus").get<double>();
  c.model.loss.m_minus = l.at("m_minus").get<double>();
  c.model.loss.absent_weight = l.at("absent_weight").get<double>();
  return c;
}

void append_le_float(std::string& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xFFu));
}

float read_le_float(const char* p) {
  std::uint32_t bits = 0;
  for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[k])) << (8 * k);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::string config_to_json_text(const TrainConfig& config) { return config_to_json(config).dump(); }

TrainConfig config_from_json_text(std::string_view text) {
  try {
    return config_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed configuration: ") + e.what());
  }
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json header;
  header["config"] = config_to_json(ckpt.config);
  header["vocabulary"] = {{"mode", std::string(corpus::to_string(ckpt.vocabulary.mode()))},
                          {"tokens", ckpt.vocabulary.tokens()}};
  header["best_epoch"] = ckpt.best_epoch;
  header["best_validation"] = ckpt.best_validation ? metrics_to_json(*ckpt.best_validation) : json(nullptr);

  std::string blob;
  json index = json::array();
  std::size_t offset = 0;
  for (const auto& [name, tensor] : ckpt.params.named()) {
    index.push_back({{"name", name}, {"shape", tensor->shape()}, {"offset", offset}});
    for (float v : tensor->values()) append_le_float(blob, v);
    offset += tensor->size();
  }
  header["tensors"] = index;

  const std::string text = header.dump();
  std::string out;
  out.append(kMagic).append(" ").append(std::to_string(Checkpoint::kFormatVersion)).append("\n");
  out.append(std::to_string(text.size())).append("\n");
  out.append(text).append("\n");
  out.append(blob);
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  const auto first_nl = bytes.find('\n');
  if (first_nl == std::string_view::npos || bytes.substr(0, kMagic.size()) != kMagic) {
    throw CheckpointError("not a hypercaps checkpoint");
  }
  const auto version_text = bytes.substr(kMagic.size() + 1, first_nl - kMagic.size() - 1);
  int version = 0;
  try {
    version = std::stoi(std::string(version_text));
  } catch (const std::exception&) {
    throw CheckpointError("malformed checkpoint version '" + std::string(version_text) + "'");
  }
  if (version != Checkpoint::kFormatVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) + " is not supported (this build reads version " +
                          std::to_string(Checkpoint::kFormatVersion) + ")");
  }
  const auto second_nl = bytes.find('\n', first_nl + 1);
  if (second_nl == std::string_view::npos) throw CheckpointError("truncated checkpoint header");
  std::size_t header_size = 0;
  try {
    header_size = std::stoull(std::string(bytes.substr(first_nl + 1, second_nl - first_nl - 1)));
  } catch (const std::exception&) {
    throw CheckpointError("malformed checkpoint header length");
  }
  const std::size_t header_begin = second_nl + 1;
  if (header_begin + header_size + 1 > bytes.size()) throw CheckpointError("truncated checkpoint header");

  json header;
  try {
    header = json::parse(bytes.substr(header_begin, header_size));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  const char* blob = bytes.data() + header_begin + header_size + 1;
  const std::size_t blob_size = bytes.size() - (header_begin + header_size + 1);

  Checkpoint ckpt;
  try {
    ckpt.config = config_from_json(header.at("config"));
    const auto& vocab = header.at("vocabulary");
    ckpt.vocabulary = corpus::Vocabulary::from_tokens(vocab.at("tokens").get<std::vector<std::string>>(),
                                                      corpus::parse_token_mode(vocab.at("mode").get<std::string>()));
    ckpt.best_epoch = header.at("best_epoch").get<std::size_t>();
    if (!header.at("best_validation").is_null()) ckpt.best_validation = metrics_from_json(header.at("best_validation"));

    auto named = ckpt.params.named();
    const auto& index = header.at("tensors");
    if (index.size() != named.size()) {
      throw CheckpointError("checkpoint holds " + std::to_string(index.size()) + " tensors, expected " +
                            std::to_string(named.size()));
    }
    for (std::size_t k = 0; k < named.size(); ++k) {
      const auto& entry = index[k];
      if (entry.at("name").get<std::string>() != named[k].first) {
        throw CheckpointError("unexpected tensor '" + entry.at("name").get<std::string>() + "', expected '" +
                              named[k].first + "'");
      }
      const auto shape = entry.at("shape").get<numerics::Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const std::size_t count = numerics::shape_size(shape);
      if ((offset + count) * 4 > blob_size) throw CheckpointError("tensor '" + named[k].first + "' exceeds the data section");
      std::vector<float> values(count);
      for (std::size_t i = 0; i < count; ++i) values[i] = read_le_float(blob + (offset + i) * 4);
      *named[k].second = numerics::Tensor<float>(shape, std::move(values));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

std::vector<model::Prediction> predict(const Checkpoint& ckpt, std::span<const corpus::EntityPair> pairs,
                                       std::size_t workers) {
  const auto encoded = corpus::encode_pairs(pairs, ckpt.vocabulary);
  if (ckpt.config.precision == Precision::float64) {
    return predict_params(ckpt.params.cast<double>(), ckpt.config.model, encoded, workers);
  }
  return predict_params(ckpt.params, ckpt.config.model, encoded, workers);
}

Metrics evaluate(const Checkpoint& ckpt, std::span<const corpus::EntityPair> pairs, std::size_t workers) {
  const auto predictions = predict(ckpt, pairs, workers);
  std::vector<Label> predicted, gold;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    predicted.push_back(predictions[i].label);
    gold.push_back(pairs[i].label);
  }
  return score(predicted, gold);
}

}  // namespace hypercaps::training
