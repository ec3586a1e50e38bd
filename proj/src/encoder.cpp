#include "cotbert/encoder.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>

#include "cotbert/error.hpp"
#include "cotbert/remote_encoder.hpp"
#include "cotbert/toy_encoder.hpp"

namespace cotbert {

void Encoder::backward(const Activations&, const Tensor3&) {
  fail(ErrorKind::config, "encoder backend '" + std::string(backend()) + "' is not trainable");
}

void Encoder::delegated_step(const nlohmann::json&) {
  fail(ErrorKind::internal, "encoder backend '" + std::string(backend()) + "' has no delegated optimizer");
}

Matrix extract_final_mask(const Tensor3& hidden, const EncodedBatch& batch) {
  require(hidden.batch() == batch.batch_size() && hidden.seq() == batch.max_len, ErrorKind::shape,
          "hidden states do not match the encoded batch");
  Matrix out(batch.batch_size(), hidden.dim());
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    require(batch.final_mask_pos[i] < hidden.seq(), ErrorKind::shape, "final mask position outside the sequence");
    const auto src = hidden.at(i, batch.final_mask_pos[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Tensor3 scatter_final_mask(const Matrix& grad_rows, const EncodedBatch& batch, std::size_t hidden_dim) {
  require(grad_rows.rows() == batch.batch_size() && grad_rows.cols() == hidden_dim, ErrorKind::shape,
          "row gradient does not match the encoded batch");
  Tensor3 out(batch.batch_size(), batch.max_len, hidden_dim);
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    const auto src = grad_rows.row(i);
    std::copy(src.begin(), src.end(), out.at(i, batch.final_mask_pos[i]).begin());
  }
  return out;
}

Matrix embed_final_mask(Encoder& encoder, const EncodedBatch& batch, std::size_t chunk) {
  require(chunk > 0, ErrorKind::config, "chunk size must be positive");
  Matrix out(batch.batch_size(), encoder.hidden_dim());
  for (std::size_t begin = 0; begin < batch.batch_size(); begin += chunk) {
    const std::size_t end = std::min(batch.batch_size(), begin + chunk);
    const EncodedBatch part = slice_rows(batch, begin, end);
    const Matrix rows = extract_final_mask(encoder.forward(part).hidden, part);
    for (std::size_t i = 0; i < rows.rows(); ++i) {
      std::copy(rows.row(i).begin(), rows.row(i).end(), out.row(begin + i).begin());
    }
  }
  return out;
}

ConstantEncoder::ConstantEncoder(std::size_t hidden_dim, std::uint64_t seed) : value_(hidden_dim) {
  require(hidden_dim > 0, ErrorKind::config, "constant encoder needs hidden_dim > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  for (double& v : value_) v = dist(rng);
}

ConstantEncoder::ConstantEncoder(std::vector<double> value) : value_(std::move(value)) {
  require(!value_.empty(), ErrorKind::config, "constant encoder needs hidden_dim > 0");
}

Activations ConstantEncoder::forward(const EncodedBatch& batch) {
  Activations act;
  act.hidden = Tensor3(batch.batch_size(), batch.max_len, value_.size());
  for (std::size_t b = 0; b < batch.batch_size(); ++b) {
    for (std::size_t s = 0; s < batch.max_len; ++s) std::copy(value_.begin(), value_.end(), act.hidden.at(b, s).begin());
  }
  return act;
}

nlohmann::json ConstantEncoder::describe() const { return {{"backend", "constant"}, {"value", value_}}; }

void ConstantEncoder::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream meta(dir / "encoder.json");
  require(meta.good(), ErrorKind::io, "cannot write " + (dir / "encoder.json").string());
  meta << describe().dump(2) << '\n';
}

std::unique_ptr<Encoder> load_encoder(const std::filesystem::path& dir, const std::string& remote_url) {
  std::ifstream in(dir / "encoder.json");
  require(in.good(), ErrorKind::io, "cannot open " + (dir / "encoder.json").string());
  const auto meta = nlohmann::json::parse(in);
  const auto backend = meta.value("backend", "");
  if (backend == "toy") return ToyEncoder::load(dir);
  if (backend == "constant") return std::make_unique<ConstantEncoder>(meta.at("value").get<std::vector<double>>());
  if (backend == "remote") {
    std::string url = remote_url;
    if (url.empty()) {
      if (const char* env = std::getenv("COTBERT_REMOTE_URL")) url = env;
    }
    auto enc = std::make_unique<RemoteEncoder>(url);
    enc->load_native(dir / meta.value("native", "native"));
    return enc;
  }
  fail(ErrorKind::config, "unknown encoder backend '" + backend + "' in " + dir.string());
}

}  // namespace cotbert
