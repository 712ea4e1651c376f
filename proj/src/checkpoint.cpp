#include "proxyel/checkpoint.hpp"

#include "binary_container.hpp"

namespace proxyel {

namespace {

constexpr std::string_view kMagic = "PXELCKPT";

void write_tower(detail::ContainerWriter& w, const EncoderParams& p) {
  w.matrix(p.word_embeddings);
  w.matrix(p.position_embeddings);
  w.matrix(p.projection);
  w.vector(p.projection_bias);
}

EncoderParams read_tower(detail::ContainerReader& r, const EncoderDims& dims) {
  EncoderParams p;
  p.word_embeddings = r.matrix();
  p.position_embeddings = r.matrix();
  p.projection = r.matrix();
  p.projection_bias = r.vector();
  require(p.dims() == dims, ErrorCategory::parse, "checkpoint: tensor shapes disagree with header");
  p.validate();
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const BiEncoder& model) {
  model.validate();
  detail::ContainerWriter w(path, kMagic);
  const EncoderDims d = model.mention_tower.dims();
  w.u64(d.vocab_size);
  w.u64(d.dim);
  w.u64(d.max_seq_len);
  w.u64(d.out_dim);
  w.u8(model.similarity == SimilarityKind::dot ? 0 : 1);
  write_tower(w, model.mention_tower);
  write_tower(w, model.entity_tower);
  w.finish();
}

BiEncoder load_checkpoint(const std::filesystem::path& path) {
  detail::ContainerReader r(path, kMagic);
  EncoderDims d;
  d.vocab_size = r.u64();
  d.dim = r.u64();
  d.max_seq_len = r.u64();
  d.out_dim = r.u64();
  const auto kind = r.u8();
  require(kind <= 1, ErrorCategory::parse, "checkpoint: unknown similarity tag");
  BiEncoder model;
  model.similarity = kind == 0 ? SimilarityKind::dot : SimilarityKind::cosine;
  model.mention_tower = read_tower(r, d);
  model.entity_tower = read_tower(r, d);
  r.expect_end();
  return model;
}

}  // namespace proxyel
