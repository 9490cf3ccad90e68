#include "embedding/bpe_tokenizer.hpp"

#include <json.hpp>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <array>
#include <limits>

#include "common/error.hpp"
#include "common/io.hpp"

namespace diffdetect::embedding {

namespace {

std::string utf8_of(UChar32 cp) {
  std::string out;
  icu::UnicodeString(cp).toUTF8String(out);
  return out;
}

// Printable stand-ins for every byte value: the printable Latin-1 bytes map
// to themselves, the rest are shifted to U+0100 onwards in byte order.
std::array<std::string, 256> make_byte_symbols() {
  std::array<bool, 256> direct{};
  for (int b = '!'; b <= '~'; ++b) direct[b] = true;
  for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
  for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
  std::array<std::string, 256> out;
  int shifted = 0;
  for (int b = 0; b < 256; ++b) {
    out[b] = utf8_of(direct[b] ? b : 256 + shifted++);
  }
  return out;
}

bool is_letter(UChar32 c) { return (U_GET_GC_MASK(c) & U_GC_L_MASK) != 0; }
bool is_number(UChar32 c) { return (U_GET_GC_MASK(c) & U_GC_N_MASK) != 0; }
bool is_space(UChar32 c) { return u_isUWhiteSpace(c) != 0; }

struct CodePoint {
  UChar32 value;
  std::size_t begin;
  std::size_t end;
};

std::vector<CodePoint> code_points(std::string_view s) {
  std::vector<CodePoint> out;
  const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto len = static_cast<std::int32_t>(s.size());
  std::int32_t i = 0;
  while (i < len) {
    const std::int32_t start = i;
    UChar32 c;
    U8_NEXT(p, i, len, c);
    if (c < 0) c = 0xFFFD;
    out.push_back({c, static_cast<std::size_t>(start), static_cast<std::size_t>(i)});
  }
  return out;
}

}  // namespace

BpeTokenizer BpeTokenizer::load(const std::filesystem::path& vocab_path,
                                const std::filesystem::path& merges_path) {
  if (!std::filesystem::exists(vocab_path) || !std::filesystem::exists(merges_path)) {
    fail(ErrorCode::kIo, "missing tokenizer data files (" + vocab_path.string() + ", " +
                             merges_path.string() + ")");
  }
  BpeTokenizer t;
  t.byte_symbols_ = make_byte_symbols();

  nlohmann::json vocab;
  try {
    vocab = nlohmann::json::parse(io::read_file(vocab_path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, vocab_path.string() + ": " + e.what());
  }
  if (!vocab.is_object()) {
    fail(ErrorCode::kParse, vocab_path.string() + ": expected a token -> id object");
  }
  t.vocab_.reserve(vocab.size());
  for (const auto& [token, id] : vocab.items()) {
    t.vocab_.emplace(token, id.get<std::int32_t>());
  }
  const auto sot = t.vocab_.find("<|startoftext|>");
  const auto eot = t.vocab_.find("<|endoftext|>");
  if (sot == t.vocab_.end() || eot == t.vocab_.end()) {
    fail(ErrorCode::kParse, vocab_path.string() + ": missing start/end-of-text tokens");
  }
  t.start_id_ = sot->second;
  t.end_id_ = eot->second;

  const std::string merges = io::read_file(merges_path);
  std::size_t pos = 0;
  std::int32_t rank = 0;
  bool first = true;
  while (pos < merges.size()) {
    std::size_t end = merges.find('\n', pos);
    if (end == std::string::npos) end = merges.size();
    std::string line = merges.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && line.rfind("#version", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    if (line.find(' ') == std::string::npos) {
      fail(ErrorCode::kParse, merges_path.string() + ": malformed merge \"" + line + "\"");
    }
    t.ranks_.emplace(std::move(line), rank++);
  }
  return t;
}

std::string BpeTokenizer::clean(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<std::int32_t>(text.size())));
  if (U_SUCCESS(status)) {
    icu::UnicodeString normalised = nfc->normalize(u, status);
    if (U_SUCCESS(status)) u = normalised;
  }

  // Collapse whitespace runs to one space and trim.
  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (std::int32_t i = 0; i < u.length();) {
    const UChar32 c = u.char32At(i);
    i += U16_LENGTH(c);
    if (is_space(c)) {
      pending_space = !collapsed.isEmpty();
      continue;
    }
    if (pending_space) {
      collapsed.append(static_cast<UChar>(' '));
      pending_space = false;
    }
    collapsed.append(c);
  }
  collapsed.toLower(icu::Locale::getRoot());
  std::string out;
  collapsed.toUTF8String(out);
  return out;
}

std::vector<std::string> BpeTokenizer::pre_tokenize(std::string_view cleaned) {
  static constexpr std::array<std::string_view, 7> kContractions = {
      "'s", "'t", "'re", "'ve", "'m", "'ll", "'d"};
  const auto cps = code_points(cleaned);
  std::vector<std::string> pieces;
  std::size_t i = 0;
  while (i < cps.size()) {
    const UChar32 c = cps[i].value;
    if (c == '\'') {
      bool matched = false;
      for (auto con : kContractions) {
        if (cleaned.substr(cps[i].begin, con.size()) == con) {
          pieces.emplace_back(con);
          // Contractions are ASCII, so byte length equals code-point count.
          i += con.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    if (is_space(c)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (is_letter(c)) {
      while (j < cps.size() && is_letter(cps[j].value)) ++j;
    } else if (is_number(c)) {
      // single digit per piece
    } else {
      while (j < cps.size() && !is_space(cps[j].value) && !is_letter(cps[j].value) &&
             !is_number(cps[j].value)) {
        ++j;
      }
    }
    pieces.emplace_back(cleaned.substr(cps[i].begin, cps[j - 1].end - cps[i].begin));
    i = j;
  }
  return pieces;
}

std::vector<std::string> BpeTokenizer::bpe(const std::string& piece) const {
  std::vector<std::string> word;
  word.reserve(piece.size());
  for (unsigned char b : piece) word.push_back(byte_symbols_[b]);
  if (word.empty()) return word;
  word.back() += "</w>";

  std::string key;
  while (word.size() > 1) {
    std::int32_t best_rank = std::numeric_limits<std::int32_t>::max();
    std::size_t best = 0;
    for (std::size_t k = 0; k + 1 < word.size(); ++k) {
      key.assign(word[k]).append(" ").append(word[k + 1]);
      const auto it = ranks_.find(key);
      if (it != ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = k;
      }
    }
    if (best_rank == std::numeric_limits<std::int32_t>::max()) break;

    const std::string left = word[best];
    const std::string right = word[best + 1];
    std::vector<std::string> merged;
    merged.reserve(word.size());
    for (std::size_t k = 0; k < word.size();) {
      if (k + 1 < word.size() && word[k] == left && word[k + 1] == right) {
        merged.push_back(left + right);
        k += 2;
      } else {
        merged.push_back(std::move(word[k]));
        ++k;
      }
    }
    word = std::move(merged);
  }
  return word;
}

std::vector<std::int32_t> BpeTokenizer::encode_ids(std::string_view text) const {
  std::vector<std::int32_t> ids;
  for (const auto& piece : pre_tokenize(clean(text))) {
    for (const auto& sym : bpe(piece)) {
      const auto it = vocab_.find(sym);
      if (it == vocab_.end()) {
        fail(ErrorCode::kFormat, "symbol missing from vocabulary: " + sym);
      }
      ids.push_back(it->second);
    }
  }
  return ids;
}

TokenSequence BpeTokenizer::encode(std::string_view text, int context_length) const {
  if (context_length < 2) {
    fail(ErrorCode::kInvalidArgument, "context_length must be >= 2");
  }
  const auto body = encode_ids(text);
  const auto ctx = static_cast<std::size_t>(context_length);
  const std::size_t kept = std::min(body.size(), ctx - 2);

  TokenSequence seq;
  seq.ids.assign(ctx, pad_id());
  seq.ids[0] = start_id_;
  std::copy_n(body.begin(), kept, seq.ids.begin() + 1);
  seq.ids[kept + 1] = end_id_;
  seq.effective_length = static_cast<int>(kept + 2);
  return seq;
}

}  // namespace diffdetect::embedding
