#include "embedding/extract.hpp"

#include <atomic>
#include <mutex>
#include <thread>

#include "common/error.hpp"

namespace diffdetect::embedding {

EmbeddingStore extract_corpus(const corpus::Manifest& manifest, const BackendFactory& factory,
                              const ExtractOptions& options) {
  const std::size_t n = manifest.records.size();
  unsigned workers = options.workers == 0 ? std::thread::hardware_concurrency() : options.workers;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));

  // Built up front so profile errors surface before any work starts.
  std::vector<std::unique_ptr<EmbeddingBackend>> backends;
  for (unsigned w = 0; w < workers; ++w) backends.push_back(factory());
  const BackboneProfile& profile = backends.front()->profile();

  EmbeddingStore store;
  store.image_dim = static_cast<std::uint32_t>(profile.image_dim);
  store.text_dim = options.mode == FeatureMode::kImageText
                       ? static_cast<std::uint32_t>(profile.text_dim)
                       : 0u;
  store.records.resize(n);

  std::vector<std::string> errors(n);
  std::vector<char> failed(n, 0);
  std::atomic<std::size_t> next{0};

  auto work = [&](EmbeddingBackend& backend) {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& rec = manifest.records[i];
      auto& out = store.records[i];
      out.sample_id = rec.id;
      try {
        out.image_vec = backend.embed_record(rec, Modality::kImage, options.image_root);
        if (options.mode == FeatureMode::kImageText) {
          out.text_vec = backend.embed_record(rec, Modality::kText, options.image_root);
        }
      } catch (const std::exception& e) {
        failed[i] = 1;
        errors[i] = e.what();
      }
    }
  };

  if (workers == 1) {
    work(*backends.front());
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] { work(*backends[w]); });
    }
  }

  std::vector<SampleFailure> failures;
  for (std::size_t i = 0; i < n; ++i) {
    if (failed[i]) failures.push_back({manifest.records[i].id, errors[i]});
  }
  if (!failures.empty()) {
    std::string msg = std::to_string(failures.size()) + " sample(s) failed extraction:";
    for (const auto& f : failures) msg += "\n  " + f.id + ": " + f.message;
    fail(ErrorCode::kBackend, msg);
  }
  return store;
}

void extract_corpus_to_file(const corpus::Manifest& manifest, const BackendFactory& factory,
                            const ExtractOptions& options, const std::filesystem::path& out) {
  write_store(extract_corpus(manifest, factory, options), out);
}

}  // namespace diffdetect::embedding
