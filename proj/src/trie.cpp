#include "clarion/trie.hpp"

#include <algorithm>
#include <map>

#include "clarion/errors.hpp"

namespace clarion {

DecodingTrie DecodingTrie::build(CandidateSet const &candidates, CorpusManifest const &manifest)
{
    if (candidates.docs.empty()) {
        throw DataError("cannot build a decoding trie from an empty candidate set"
                        + (candidates.topic_id.empty() ? std::string() : " (topic " + candidates.topic_id + ")"));
    }
    std::vector<std::pair<std::string, std::vector<TokenId>>> seqs;
    seqs.reserve(candidates.docs.size());
    for (auto const &doc : candidates.docs) {
        auto it = manifest.id_map.find(doc.doc_id);
        if (it == manifest.id_map.end()) {
            throw DataError("candidate '" + doc.doc_id + "' has no keyword identifier in the manifest");
        }
        seqs.emplace_back(doc.doc_id, it->second.tokens);
    }
    return from_sequences(std::move(seqs));
}

DecodingTrie DecodingTrie::from_sequences(std::vector<std::pair<std::string, std::vector<TokenId>>> sequences)
{
    if (sequences.empty()) {
        throw DataError("cannot build a decoding trie from an empty candidate set");
    }
    DecodingTrie trie;
    trie.nodes_.emplace_back();
    std::map<std::string, std::size_t> seen_ids;
    for (std::size_t c = 0; c < sequences.size(); ++c) {
        auto &[doc_id, tokens] = sequences[c];
        if (tokens.empty()) {
            throw DataError("candidate '" + doc_id + "' has an empty identifier");
        }
        if (!seen_ids.emplace(doc_id, c).second) {
            throw DataError("candidate '" + doc_id + "' appears twice in the candidate set");
        }
        std::uint32_t cur = kRoot;
        trie.nodes_[cur].subtree.push_back(static_cast<std::uint32_t>(c));
        for (auto tok : tokens) {
            if (tok == Vocabulary::kSep || tok == Vocabulary::kEnd) {
                throw DataError("candidate '" + doc_id + "' identifier contains a separator token");
            }
            auto &children = trie.nodes_[cur].children;
            auto it = std::lower_bound(children.begin(), children.end(), tok,
                                       [](auto const &p, TokenId t) { return p.first < t; });
            std::uint32_t next = 0;
            if (it != children.end() && it->first == tok) {
                next = it->second;
            } else {
                next = static_cast<std::uint32_t>(trie.nodes_.size());
                children.insert(it, {tok, next});
                trie.nodes_.emplace_back();
            }
            cur = next;
            trie.nodes_[cur].subtree.push_back(static_cast<std::uint32_t>(c));
        }
        if (trie.nodes_[cur].terminal != kNoDoc) {
            throw DataError("candidates '" + trie.doc_ids_[static_cast<std::size_t>(trie.nodes_[cur].terminal)]
                            + "' and '" + doc_id + "' share the same identifier");
        }
        trie.nodes_[cur].terminal = static_cast<std::int32_t>(c);
        trie.doc_ids_.push_back(std::move(doc_id));
        trie.sequences_.push_back(std::move(tokens));
    }
    return trie;
}

std::int64_t DecodingTrie::child(std::uint32_t node, TokenId token) const
{
    auto const &children = nodes_.at(node).children;
    auto it = std::lower_bound(children.begin(), children.end(), token,
                               [](auto const &p, TokenId t) { return p.first < t; });
    if (it == children.end() || it->first != token) {
        return -1;
    }
    return it->second;
}

std::size_t DecodingTrie::terminal_count() const
{
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](Node const &n) { return n.terminal != kNoDoc; }));
}

TrieCursor::TrieCursor(DecodingTrie const &trie, ConstraintOptions options)
    : trie_(&trie), options_(options), emitted_mask_(trie.candidate_count(), false)
{
}

bool TrieCursor::alive(std::uint32_t node) const
{
    if (!options_.suppress_duplicates) {
        return true;
    }
    auto const &subtree = trie_->node(node).subtree;
    return std::any_of(subtree.begin(), subtree.end(), [&](std::uint32_t c) { return !emitted_mask_[c]; });
}

bool TrieCursor::can_continue() const
{
    auto emitted = emitted_.size() + 1;
    if (options_.max_docs != 0 && emitted >= options_.max_docs) {
        return false;
    }
    if (options_.suppress_duplicates) {
        // Emissions are distinct here, so another document must remain.
        return emitted < trie_->candidate_count();
    }
    return true;
}

std::vector<TokenId> TrieCursor::allowed() const
{
    std::vector<TokenId> out;
    if (finished_) {
        return out;
    }
    auto const &n = trie_->node(node_);
    // A terminal whose document is already out only leads on through its
    // children when duplicates are suppressed.
    bool const closable = n.terminal != DecodingTrie::kNoDoc
                          && !(options_.suppress_duplicates && emitted_mask_[static_cast<std::size_t>(n.terminal)]);
    if (closable) {
        if (can_continue()) {
            out.push_back(Vocabulary::kSep);
        }
        out.push_back(Vocabulary::kEnd);
    }
    for (auto const &[tok, next] : n.children) {
        if (alive(next)) {
            out.push_back(tok);
        }
    }
    return out;
}

bool TrieCursor::allows(TokenId token) const
{
    auto a = allowed();
    return std::binary_search(a.begin(), a.end(), token);
}

void TrieCursor::advance(TokenId token)
{
    if (!allows(token)) {
        throw DataError("token " + std::to_string(token) + " is not allowed after " + std::to_string(emitted_.size())
                        + " emitted document(s)");
    }
    if (token == Vocabulary::kSep || token == Vocabulary::kEnd) {
        auto c = static_cast<std::uint32_t>(trie_->node(node_).terminal);
        emitted_mask_[c] = true;
        emitted_.push_back(c);
        node_ = DecodingTrie::kRoot;
        finished_ = token == Vocabulary::kEnd;
        return;
    }
    node_ = static_cast<std::uint32_t>(trie_->child(node_, token));
}

std::vector<TokenId> allowed_tokens(DecodingTrie const &trie, std::span<TokenId const> prefix,
                                    ConstraintOptions options)
{
    TrieCursor cursor(trie, options);
    for (auto tok : prefix) {
        cursor.advance(tok);
    }
    return cursor.allowed();
}

std::vector<std::string> parse_generation(std::span<TokenId const> tokens, DecodingTrie const &trie)
{
    std::vector<std::string> out;
    std::vector<bool> seen(trie.candidate_count(), false);
    std::uint32_t node = DecodingTrie::kRoot;
    std::size_t segment = 0;
    auto close_segment = [&](std::size_t pos) {
        auto terminal = trie.node(node).terminal;
        if (node == DecodingTrie::kRoot || terminal == DecodingTrie::kNoDoc) {
            throw DataError("generated segment " + std::to_string(segment + 1) + " ending at token "
                            + std::to_string(pos) + " is not a complete identifier");
        }
        auto c = static_cast<std::size_t>(terminal);
        if (!seen[c]) {
            seen[c] = true;
            out.push_back(trie.doc_id(c));
        }
        node = DecodingTrie::kRoot;
        ++segment;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        auto tok = tokens[i];
        if (tok == Vocabulary::kSep) {
            close_segment(i);
            continue;
        }
        if (tok == Vocabulary::kEnd) {
            close_segment(i);
            return out;
        }
        auto next = trie.child(node, tok);
        if (next < 0) {
            throw DataError("token " + std::to_string(tok) + " at position " + std::to_string(i)
                            + " leaves the identifier trie");
        }
        node = static_cast<std::uint32_t>(next);
    }
    if (node != DecodingTrie::kRoot) {
        close_segment(tokens.size());
    }
    return out;
}

std::vector<TokenId> generation_tokens(DecodingTrie const &trie, std::span<std::uint32_t const> candidates)
{
    std::vector<TokenId> out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto const &seq = trie.sequence(candidates[i]);
        out.insert(out.end(), seq.begin(), seq.end());
        out.push_back(i + 1 == candidates.size() ? Vocabulary::kEnd : Vocabulary::kSep);
    }
    return out;
}

} // namespace clarion
