#include "residprobe/prompts.hpp"

namespace residprobe {

namespace {

void append_text(std::vector<int>& tokens, const std::string& text) {
    for (unsigned char c : text) tokens.push_back(Tokenizer::byte_token(c));
}

void append_header(std::vector<int>& tokens, int role) {
    tokens.push_back(TOK_START_HEADER);
    tokens.push_back(role);
    tokens.push_back(TOK_END_HEADER);
    tokens.push_back(Tokenizer::byte_token('\n'));
}

} // namespace

void PromptBuilder::add_system(const std::string& text) {
    if (user_open_ || tokens_.size() != 1)
        throw UsageError("prompt builder: system block must come first");
    append_header(tokens_, TOK_ROLE_SYSTEM);
    append_text(tokens_, text);
    tokens_.push_back(TOK_EOT);
}

void PromptBuilder::begin_user() {
    if (user_open_) throw UsageError("prompt builder: user block already open");
    append_header(tokens_, TOK_ROLE_USER);
    user_open_ = true;
}

TokenSpan PromptBuilder::add_text(const std::string& text) {
    if (!user_open_) throw UsageError("prompt builder: no open user block");
    TokenSpan span;
    span.begin = static_cast<int>(tokens_.size());
    append_text(tokens_, text);
    span.end = static_cast<int>(tokens_.size());
    return span;
}

PromptInfo PromptBuilder::finish() {
    if (!user_open_) throw UsageError("prompt builder: no user block");
    tokens_.push_back(TOK_EOT);
    tokens_.push_back(TOK_START_HEADER);
    tokens_.push_back(TOK_ROLE_ASSISTANT);
    tokens_.push_back(TOK_END_HEADER);
    PromptInfo info;
    info.tokens = std::move(tokens_);
    user_open_ = false;
    return info;
}

std::string context_block(const DatasetRecord& r) {
    std::string out;
    if (!r.source_text.empty()) out += "Source:\n" + r.source_text + "\n\n";
    if (!r.instructions.empty()) out += "Instructions given to the writer:\n" + r.instructions + "\n\n";
    return out;
}

PromptInfo paired_prompt(const DatasetRecord& r, PairOrdering ordering, bool include_context) {
    const std::string& first = ordering == PairOrdering::self_first ? r.self_text : r.other_text;
    const std::string& second = ordering == PairOrdering::self_first ? r.other_text : r.self_text;

    PromptBuilder b;
    b.add_system("Respond only with 1 or 2.");
    b.begin_user();
    std::string head = "You will see two texts. One of them was written by you and the other "
                       "was written by someone else.\n\n";
    if (include_context) head += context_block(r);
    b.add_text(head + "Text 1:\n");
    TokenSpan s1 = b.add_text(first);
    b.add_text("\n\nText 2:\n");
    TokenSpan s2 = b.add_text(second);
    b.add_text("\n\nWhich text did you write? Respond with only 1 or 2.\nAnswer:");
    PromptInfo info = b.finish();
    info.text1_span = s1;
    info.text2_span = s2;
    return info;
}

PromptInfo individual_prompt(const DatasetRecord& r, ProbeAuthor probe, bool include_context) {
    const std::string& text = probe == ProbeAuthor::self ? r.self_text : r.other_text;
    PromptBuilder b;
    TokenSpan span;
    if (include_context) {
        b.add_system("Respond only with Yes or No.");
        b.begin_user();
        b.add_text(context_block(r) +
                   "Considering the context above, here is a piece of text:\n\nText:\n");
        span = b.add_text(text);
        b.add_text("\n\nDo you think you wrote this text? Respond with only \"Yes\" or "
                   "\"No\".\nAnswer:");
    } else {
        // Blind variant: no source, no instructions, no hint of origin.
        b.begin_user();
        b.add_text("I have some pieces of text. Half of them were written by you and half were "
                   "written by others, but I don't know which is which. I'm going to show you "
                   "the text, and I want you to tell me whether you think you wrote it. Respond "
                   "with either \"Yes\", if the text seems like something you might have "
                   "written, or \"No\", if it doesn't.\n\nText:\n");
        span = b.add_text(text);
        b.add_text("\n\nPlease respond with only \"Yes\" or \"No\".");
    }
    PromptInfo info = b.finish();
    info.text_span = span;
    return info;
}

namespace {

struct OptionWording {
    const char* self_phrase;
    const char* other_phrase;
};

// Four answer wordings; options are always labeled A then B.
constexpr OptionWording kWordings[4] = {
    {"Me", "Someone else"},
    {"I wrote it", "Another author wrote it"},
    {"The author is myself", "The author is somebody else"},
    {"It was written by me", "It was written by another"},
};

} // namespace

TwoAfcPrompt build_2afc_prompt(const std::string& context, const std::string& text,
                               int rotation, bool self_is_b) {
    if (rotation < 0 || rotation > 3) throw UsageError("2afc rotation must be in 0..3");
    const OptionWording& w = kWordings[rotation];
    const std::string option_a = self_is_b ? w.other_phrase : w.self_phrase;
    const std::string option_b = self_is_b ? w.self_phrase : w.other_phrase;

    PromptBuilder b;
    b.add_system("Respond only with the letter A or B.");
    b.begin_user();
    std::string head;
    if (!context.empty()) head += context;
    head += "Here is a text:\n\nText:\n";
    b.add_text(head);
    TokenSpan span = b.add_text(text);
    b.add_text("\n\nTaking into consideration how you would write a text like that, who do you "
               "think wrote this one?\nA) " +
               option_a + "\nB) " + option_b +
               "\nRespond only with the letter A or B.\nAnswer:");
    TwoAfcPrompt out;
    out.info = b.finish();
    out.info.text_span = span;
    out.correct_token = self_is_b ? kTokB : kTokA;
    return out;
}

const std::vector<DummyItem>& dummy_battery() {
    static const std::vector<DummyItem> items = {
        {"Yesterday Marcus Webb signed the lease on the corner unit.", true},
        {"The kettle finally boiled over while nobody was watching.", false},
        {"Priya Natarajan presented the quarterly figures this morning.", true},
        {"Gravel crunched under the tires as the gate swung open.", false},
        {"According to Daniel Okafor, the bridge will reopen in spring.", true},
        {"The spreadsheet refused to load for the third time today.", false},
        {"Elena Vasquez left a note about the broken thermostat.", true},
        {"Rain hammered the skylight through most of the afternoon.", false},
        {"The award was accepted on stage by Tomas Lindqvist.", true},
        {"Fresh paint fumes drifted down the stairwell all week.", false},
        {"Harriet Boone keeps the ferry schedule pinned to the door.", true},
        {"The last bus out of the depot runs at quarter past eleven.", false},
        {"A parcel addressed to Samuel Adeyemi sat unclaimed for days.", true},
        {"The orchard gate sticks whenever the humidity climbs.", false},
        {"Nobody told Ingrid Larsen that the meeting had moved.", true},
        {"Two of the streetlights on the hill flicker after midnight.", false},
        {"The recipe came from a clipping signed by Rosa Delgado.", true},
        {"An unmarked trail loops behind the reservoir embankment.", false},
        {"Kenji Watanabe repaired the antenna before the storm hit.", true},
        {"The archive smells of cedar and old newspaper stock.", false},
        {"Fatima al-Rashid catalogued every photograph by hand.", true},
        {"The vending machine only accepts exact change now.", false},
        {"It was Gregor Havel who first noticed the survey error.", true},
        {"Low tide exposes the old pilings along the north shore.", false},
    };
    return items;
}

PromptInfo dummy_prompt(const DummyItem& item) {
    PromptBuilder b;
    b.add_system("Respond only with Yes or No.");
    b.begin_user();
    b.add_text("Does the following text mention a person's name?\n\nText:\n");
    TokenSpan span = b.add_text(item.text);
    b.add_text("\n\nRespond with only \"Yes\" or \"No\".\nAnswer:");
    PromptInfo info = b.finish();
    info.text_span = span;
    return info;
}

const std::vector<NuisancePair>& nuisance_battery() {
    // 12 minimal pairs: 3 A/B, 3 Yes/No, 6 pronoun contrasts. Each pair's two
    // prompts differ only in the target word.
    static const std::vector<NuisancePair> pairs = {
        {"Respond only with the letter A.", "Respond only with the letter B."},
        {"Output exactly one letter: A.", "Output exactly one letter: B."},
        {"Say A.", "Say B."},
        {"Respond only with the word Yes.", "Respond only with the word No."},
        {"Output exactly one word: Yes.", "Output exactly one word: No."},
        {"Say Yes.", "Say No."},
        {"Repeat exactly this word: I", "Repeat exactly this word: He"},
        {"Say I.", "Say She."},
        {"Repeat exactly this word: Me", "Repeat exactly this word: Him"},
        {"Say Me.", "Say Someone."},
        {"Repeat exactly this word: My", "Repeat exactly this word: His"},
        {"Say Mine.", "Say Theirs."},
    };
    return pairs;
}

PromptInfo nuisance_prompt(const std::string& request) {
    PromptBuilder b;
    b.add_system("Respond only with the requested word.");
    b.begin_user();
    b.add_text(request + "\nAnswer:");
    return b.finish();
}

} // namespace residprobe
