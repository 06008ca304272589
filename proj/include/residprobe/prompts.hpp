#pragma once

#include <string>
#include <vector>

#include "residprobe/dataset.hpp"
#include "residprobe/tokenizer.hpp"

namespace residprobe {

// Answer tokens used by the evaluation paradigms. Multi-character answers
// ("Yes"/"No") are scored on their first byte under the byte tokenizer.
inline constexpr int kTokYes = kByteOffset + 'Y';
inline constexpr int kTokNo = kByteOffset + 'N';
inline constexpr int kTokA = kByteOffset + 'A';
inline constexpr int kTokB = kByteOffset + 'B';
inline constexpr int kTokLabel1 = kByteOffset + '1';
inline constexpr int kTokLabel2 = kByteOffset + '2';

struct TokenSpan {
    int begin = 0; // inclusive
    int end = 0;   // exclusive
};

struct PromptInfo {
    std::vector<int> tokens;
    TokenSpan text_span;   // evaluated text (single-text paradigms)
    TokenSpan text1_span;  // paired presentation only
    TokenSpan text2_span;
    // Position steered by the offset(-2) convention: the token right before
    // the final header token, i.e. two before the first generated position.
    int answer_position() const { return static_cast<int>(tokens.size()) - 2; }
};

// Token-level chat scaffold:
//   bos [sh system eh \n <system> eot] sh user eh \n <user> eot sh assistant eh
// The prompt ends at the assistant end-header; generation starts right after.
class PromptBuilder {
  public:
    void add_system(const std::string& text);
    void begin_user();
    // Appends raw text to the user turn, optionally recording its token span.
    TokenSpan add_text(const std::string& text);
    PromptInfo finish();

  private:
    std::vector<int> tokens_ = {TOK_BOS};
    bool user_open_ = false;
};

enum class Paradigm { paired, individual, dummy };
enum class PairOrdering { self_first, self_second };
enum class ProbeAuthor { self, other };

// Paired presentation: two labeled texts, model asked which one it wrote;
// answer tokens "1"/"2".
PromptInfo paired_prompt(const DatasetRecord& r, PairOrdering ordering, bool include_context);

// Individual presentation: one text, yes/no authorship probe. Without
// context, uses the blind variant that presents the bare text.
PromptInfo individual_prompt(const DatasetRecord& r, ProbeAuthor probe, bool include_context);

// Two-alternative forced choice used for contrast-vector extraction. The
// options are always labeled A then B; `rotation` picks one of four answer
// wordings and `self_is_b` balances the self/other assignment.
struct TwoAfcPrompt {
    PromptInfo info;
    int correct_token = 0; // kTokA or kTokB
};
TwoAfcPrompt build_2afc_prompt(const std::string& context_block, const std::string& text,
                               int rotation, bool self_is_b);

// Context block shared by the 2AFC and with-context paradigms.
std::string context_block(const DatasetRecord& r);

struct DummyItem {
    std::string text;
    bool has_name = false;
};

// Fixed person-name-recognition battery used to test steering specificity.
const std::vector<DummyItem>& dummy_battery();
PromptInfo dummy_prompt(const DummyItem& item);

// Fixed minimal-pair battery for the nuisance vector: each pair differs only
// in the word the model is told to output (A/B, Yes/No, pronoun sets).
struct NuisancePair {
    std::string first;
    std::string second;
};
const std::vector<NuisancePair>& nuisance_battery();
PromptInfo nuisance_prompt(const std::string& request);

} // namespace residprobe
