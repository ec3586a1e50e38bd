#include "cotbert/remote_encoder.hpp"

#include <fstream>
#include <httplib.h>

#include "cotbert/error.hpp"

namespace cotbert {
namespace {

struct RemoteCache final : ForwardCache {
  std::int64_t handle = -1;
  std::size_t batch = 0;
  std::size_t seq = 0;
};

nlohmann::json parse_reply(const httplib::Result& res, const std::string& what) {
  require(static_cast<bool>(res), ErrorKind::io, "remote encoder unreachable (" + what + "): " + httplib::to_string(res.error()));
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::io, "remote encoder returned non-JSON for " + what + " (HTTP " + std::to_string(res->status) + ")");
  }
  require(body.is_object(), ErrorKind::io, "remote encoder reply to " + what + " is not an object");
  if (body.contains("error")) fail(ErrorKind::numeric, "remote encoder " + what + ": " + body.at("error").dump());
  require(res->status == 200, ErrorKind::io, "remote encoder " + what + " failed with HTTP " + std::to_string(res->status));
  return body;
}

nlohmann::json rows_json(const EncodedBatch& b, auto value_at) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < b.batch_size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < b.max_len; ++j) row.push_back(value_at(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

RemoteEncoder::RemoteEncoder(std::string url) : url_(std::move(url)) {
  require(!url_.empty(), ErrorKind::config, "remote encoder needs a URL (remote_url or COTBERT_REMOTE_URL)");
  httplib::Client client(url_);
  client.set_read_timeout(600, 0);
  const auto info = parse_reply(client.Get("/info"), "/info");
  hidden_dim_ = info.at("hidden_dim").get<std::size_t>();
  supports_position_ids_ = info.value("supports_position_ids", false);
  trainable_ = info.value("trainable", false);
  require(hidden_dim_ > 0, ErrorKind::config, "remote encoder reports hidden_dim 0");
}

nlohmann::json RemoteEncoder::post(const std::string& path, const nlohmann::json& body) const {
  httplib::Client client(url_);
  client.set_read_timeout(600, 0);
  client.set_write_timeout(600, 0);
  return parse_reply(client.Post(path, body.dump(), "application/json"), path);
}

Activations RemoteEncoder::forward(const EncodedBatch& batch) {
  nlohmann::json req;
  req["mode"] = mode() == Mode::train ? "train" : "eval";
  req["token_ids"] = rows_json(batch, [&](std::size_t i, std::size_t j) { return batch.ids(i)[j]; });
  req["attention_mask"] = rows_json(batch, [&](std::size_t i, std::size_t j) { return int(batch.mask(i)[j]); });
  if (!batch.position_ids.empty()) {
    require(supports_position_ids_, ErrorKind::config, "remote encoder does not accept position id overrides");
    req["position_ids"] = rows_json(batch, [&](std::size_t i, std::size_t j) { return batch.position(i, j); });
  }
  const auto reply = post("/forward", req);
  const auto& hidden = reply.at("hidden");
  require(hidden.is_array() && hidden.size() == batch.batch_size(), ErrorKind::shape, "remote hidden states have the wrong batch size");

  Activations act;
  act.hidden = Tensor3(batch.batch_size(), batch.max_len, hidden_dim_);
  for (std::size_t b = 0; b < batch.batch_size(); ++b) {
    require(hidden[b].size() == batch.max_len, ErrorKind::shape, "remote hidden states have the wrong sequence length");
    for (std::size_t s = 0; s < batch.max_len; ++s) {
      const auto& vec = hidden[b][s];
      require(vec.size() == hidden_dim_, ErrorKind::shape, "remote hidden states have the wrong width");
      auto dst = act.hidden.at(b, s);
      for (std::size_t k = 0; k < hidden_dim_; ++k) dst[k] = vec[k].get<double>();
    }
  }
  if (reply.contains("handle")) {
    auto cache = std::make_shared<RemoteCache>();
    cache->handle = reply.at("handle").get<std::int64_t>();
    cache->batch = batch.batch_size();
    cache->seq = batch.max_len;
    act.cache = std::move(cache);
  }
  return act;
}

void RemoteEncoder::backward(const Activations& activations, const Tensor3& grad_hidden) {
  const auto* cache = dynamic_cast<const RemoteCache*>(activations.cache.get());
  require(cache != nullptr, ErrorKind::internal, "backward needs a train-mode forward pass of the remote encoder");
  require(grad_hidden.batch() == cache->batch && grad_hidden.seq() == cache->seq && grad_hidden.dim() == hidden_dim_,
          ErrorKind::shape, "gradient does not match remote activations");
  nlohmann::json grad = nlohmann::json::array();
  for (std::size_t b = 0; b < grad_hidden.batch(); ++b) {
    nlohmann::json seq = nlohmann::json::array();
    for (std::size_t s = 0; s < grad_hidden.seq(); ++s) {
      const auto v = grad_hidden.at(b, s);
      seq.push_back(std::vector<double>(v.begin(), v.end()));
    }
    grad.push_back(std::move(seq));
  }
  post("/backward", {{"handle", cache->handle}, {"grad", std::move(grad)}});
}

void RemoteEncoder::zero_grad() { post("/zero_grad", nlohmann::json::object()); }

void RemoteEncoder::delegated_step(const nlohmann::json& optimizer) { post("/step", {{"optimizer", optimizer}}); }

void RemoteEncoder::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  post("/save", {{"path", std::filesystem::absolute(dir / "native").string()}});
  std::ofstream meta(dir / "encoder.json");
  require(meta.good(), ErrorKind::io, "cannot write " + (dir / "encoder.json").string());
  meta << describe().dump(2) << '\n';
}

void RemoteEncoder::load_native(const std::filesystem::path& native_dir) {
  post("/load", {{"path", std::filesystem::absolute(native_dir).string()}});
}

nlohmann::json RemoteEncoder::describe() const {
  return {{"backend", "remote"},
          {"hidden_dim", hidden_dim_},
          {"supports_position_ids", supports_position_ids_},
          {"native", "native"}};
}

}  // namespace cotbert
