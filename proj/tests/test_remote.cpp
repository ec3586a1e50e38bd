#include <doctest.h>

#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "cotbert/checkpoint.hpp"
#include "cotbert/error.hpp"
#include "cotbert/optimizer.hpp"
#include "cotbert/remote_encoder.hpp"
#include "cotbert/sts.hpp"
#include "cotbert/trainer.hpp"
#include "support.hpp"

using namespace cotbert;

namespace {

// Serves a ToyEncoder over the HTTP protocol RemoteEncoder speaks.
class MockServer {
 public:
  explicit MockServer(const ToyEncoderConfig& config) : encoder_(make_toy_encoder(config)) {
    auto json_handler = [this](auto fn) {
      return [this, fn](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mutex_);
        nlohmann::json reply;
        try {
          reply = fn(req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body));
        } catch (const std::exception& e) {
          reply = {{"error", e.what()}};
          res.status = 500;
        }
        res.set_content(reply.dump(), "application/json");
      };
    };
    server_.Get("/info", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json{{"hidden_dim", encoder_->hidden_dim()},
                                     {"supports_position_ids", true},
                                     {"trainable", true}}
                          .dump(),
                      "application/json");
    });
    server_.Post("/forward", json_handler([this](const nlohmann::json& j) { return forward(j); }));
    server_.Post("/backward", json_handler([this](const nlohmann::json& j) {
      const auto handle = j.at("handle").get<std::int64_t>();
      const auto& act = cache_.at(handle);
      const auto& g = j.at("grad");
      Tensor3 grad(act.hidden.batch(), act.hidden.seq(), act.hidden.dim());
      for (std::size_t b = 0; b < grad.batch(); ++b)
        for (std::size_t s = 0; s < grad.seq(); ++s)
          for (std::size_t k = 0; k < grad.dim(); ++k) grad.at(b, s)[k] = g[b][s][k].get<double>();
      encoder_->backward(act, grad);
      return nlohmann::json::object();
    }));
    server_.Post("/zero_grad", json_handler([this](const nlohmann::json&) {
      encoder_->zero_grad();
      cache_.clear();
      return nlohmann::json::object();
    }));
    server_.Post("/step", json_handler([this](const nlohmann::json& j) {
      const auto& o = j.at("optimizer");
      if (!optimizer_) {
        AdamWConfig c;
        c.learning_rate = o.at("learning_rate").get<double>();
        c.beta1 = o.at("beta1").get<double>();
        c.beta2 = o.at("beta2").get<double>();
        c.epsilon = o.at("epsilon").get<double>();
        c.weight_decay = o.at("weight_decay").get<double>();
        optimizer_.emplace(c);
      }
      optimizer_->step(*encoder_);
      return nlohmann::json::object();
    }));
    server_.Post("/save", json_handler([this](const nlohmann::json& j) {
      encoder_->save(j.at("path").get<std::string>());
      return nlohmann::json::object();
    }));
    server_.Post("/load", json_handler([this](const nlohmann::json& j) {
      encoder_ = ToyEncoder::load(j.at("path").get<std::string>());
      optimizer_.reset();
      return nlohmann::json::object();
    }));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  bool fail_forward = false;

 private:
  nlohmann::json forward(const nlohmann::json& j) {
    if (fail_forward) throw std::runtime_error("device out of memory");
    const auto& ids = j.at("token_ids");
    EncodedBatch b;
    b.max_len = ids.empty() ? 0 : ids[0].size();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t s = 0; s < b.max_len; ++s) {
        b.token_ids.push_back(ids[i][s].get<TokenId>());
        b.attention_mask.push_back(j.at("attention_mask")[i][s].get<std::uint8_t>());
        if (j.contains("position_ids")) b.position_ids.push_back(j.at("position_ids")[i][s].get<std::int32_t>());
      }
      b.final_mask_pos.push_back(0);
      b.sentence_token_lens.push_back(0);
      b.sentence_start.push_back(0);
    }
    encoder_->set_mode(j.at("mode") == "train" ? Mode::train : Mode::eval);
    auto act = encoder_->forward(b);
    nlohmann::json hidden = nlohmann::json::array();
    for (std::size_t i = 0; i < act.hidden.batch(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t s = 0; s < act.hidden.seq(); ++s) {
        const auto v = act.hidden.at(i, s);
        row.push_back(std::vector<double>(v.begin(), v.end()));
      }
      hidden.push_back(std::move(row));
    }
    nlohmann::json reply = {{"hidden", std::move(hidden)}};
    if (encoder_->mode() == Mode::train) {
      reply["handle"] = next_handle_;
      cache_[next_handle_++] = std::move(act);
    }
    return reply;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mutex_;
  std::unique_ptr<ToyEncoder> encoder_;
  std::map<std::int64_t, Activations> cache_;
  std::int64_t next_handle_ = 0;
  std::optional<AdamW> optimizer_;
};

}  // namespace

TEST_CASE("remote forward matches the wrapped encoder") {
  const auto tok = testing::toy_tokenizer();
  const auto config = testing::toy_config(tok.vocab_size(), 0.0, 8);
  MockServer server(config);
  RemoteEncoder remote(server.url());
  CHECK(remote.hidden_dim() == 32);
  CHECK(remote.trainable());
  CHECK(remote.supports_position_ids());

  auto local = make_toy_encoder(config);
  const auto anchor = builtin_template_set(TemplateVariant::full).anchor;
  const auto& corpus = testing::toy_corpus();
  const auto a = embed_sentences(remote, tok, anchor, corpus, 48, 7);
  const auto b = embed_sentences(*local, tok, anchor, corpus, 48);
  REQUIRE(a.rows() == b.rows());
  for (std::size_t i = 0; i < a.values().size(); ++i) CHECK(a.values()[i] == b.values()[i]);
}

TEST_CASE("remote training steps match local ones") {
  const auto tok = testing::toy_tokenizer();
  const auto config = testing::toy_config(tok.vocab_size(), 0.0, 8);
  MockServer server(config);
  RemoteEncoder remote(server.url());
  auto local = make_toy_encoder(config);
  const auto templates = builtin_template_set(TemplateVariant::full);
  const auto& c = testing::toy_corpus();
  const std::vector<std::string> sentences(c.begin(), c.begin() + 6);
  const auto batches = build_step_batch(sentences, templates, tok, 48, true);

  AdamW remote_opt(AdamWConfig{}), local_opt(AdamWConfig{});
  for (int step = 0; step < 3; ++step) {
    const double lr = train_step(remote, remote_opt, batches, templates, tok, {}, step).loss;
    const double ll = train_step(*local, local_opt, batches, templates, tok, {}, step).loss;
    CHECK(std::abs(lr - ll) < 1e-12);
  }

  // Checkpoints keep the backend's native container.
  const auto dir = testing::temp_dir("remote_ckpt");
  save_checkpoint(dir, remote, tok, templates, {3, 0.0, 48, {{"remote_url", server.url()}}});
  CHECK(std::filesystem::exists(dir / "native" / "encoder.bin"));
  auto ckpt = load_checkpoint(dir);
  CHECK(ckpt.encoder->backend() == "remote");
  const auto a = embed_sentences(ckpt, sentences);
  const auto b = embed_sentences(*local, tok, templates.anchor, sentences, 48);
  for (std::size_t i = 0; i < a.values().size(); ++i) CHECK(std::abs(a.values()[i] - b.values()[i]) < 1e-12);
  std::filesystem::remove_all(dir);
}

TEST_CASE("remote failures surface as errors") {
  const auto tok = testing::toy_tokenizer();
  MockServer server(testing::toy_config(tok.vocab_size()));
  RemoteEncoder remote(server.url());
  server.fail_forward = true;
  const auto anchor = builtin_template_set(TemplateVariant::full).anchor;
  try {
    embed_sentences(remote, tok, anchor, testing::toy_corpus(), 48);
    FAIL("remote error ignored");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::numeric);
    CHECK(std::string(e.what()).find("out of memory") != std::string::npos);
  }
  CHECK_THROWS_AS(RemoteEncoder(""), Error);
  try {
    RemoteEncoder unreachable("http://127.0.0.1:1");
    FAIL("connected to a closed port");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::io);
  }
}
