//! A small synthetic news-wire corpus and the n-gram model trained on it.
//!
//! Documents are drawn from a weighted phrase grammar with a seeded ChaCha
//! stream, so the corpus, and therefore the built-in model, is identical on
//! every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::probmodel::{join_words, split_text, NGramModel};

pub const BUILTIN_SEED: u64 = 0x5EED_C0DE;
pub const BUILTIN_DOCUMENTS: usize = 1500;
pub const BUILTIN_ORDER: usize = 3;
pub const BUILTIN_ALPHA: f64 = 0.01;

/// Sentences of one article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub sentences: Vec<String>,
}

impl Document {
    pub fn text(&self) -> String {
        self.sentences.join(" ")
    }
}

// Expansions are space separated; `@name` refers to another rule.
type Rule = (&'static str, &'static [(u32, &'static str)]);

const GRAMMAR: &[Rule] = &[
    ("sentence", &[
        (6, "@report"),
        (4, "@event"),
        (3, "@quote"),
        (2, "@figure"),
        (2, "@plan"),
        (1, "@time , @event"),
    ]),
    ("report", &[
        (5, "@actor @say_past that @clause ."),
        (3, "@actor @say_past on @day that @clause ."),
        (2, "according to @actor , @clause ."),
        (1, "@actor declined to comment on @topic ."),
    ]),
    ("event", &[
        (4, "@actor @act_past @object @where ."),
        (3, "@actor @act_past @object ."),
        (2, "@object was @passive @where on @day ."),
        (1, "@actor met @actor @where to discuss @topic ."),
    ]),
    ("quote", &[
        (3, "\" @clause , \" @actor said ."),
        (2, "\" we @modal @act_base @object , \" said @actor ."),
        (1, "\" this is @judgement , \" @actor told reporters ."),
    ]),
    ("figure", &[
        (3, "@measure @moved @number percent @period ."),
        (2, "@measure @moved to @number @unit @period , @actor said ."),
        (1, "@actor expects @measure to @move_base @period ."),
    ]),
    ("plan", &[
        (3, "@actor @plan_verb to @act_base @object @period ."),
        (2, "@actor is expected to @act_base @object @where ."),
        (1, "@actor will @act_base @object after @topic ."),
    ]),
    ("clause", &[
        (4, "@actor @modal @act_base @object"),
        (3, "@measure @moved @number percent @period"),
        (3, "@actor @act_past @object"),
        (2, "@topic @remained @judgement"),
        (1, "@object was @passive @where"),
    ]),
    ("actor", &[
        (5, "the @role"),
        (3, "@name"),
        (2, "the @adj @role"),
        (2, "@place officials"),
        (1, "a spokesman for the @org"),
        (1, "the @org"),
    ]),
    ("object", &[
        (4, "the @adj @thing"),
        (4, "the @thing"),
        (2, "a new @thing"),
        (1, "@number @plural"),
        (1, "its @thing"),
    ]),
    ("topic", &[
        (3, "the @thing"),
        (2, "the @adj @thing"),
        (1, "the situation in @place"),
        (1, "talks with @name"),
    ]),
    ("where", &[
        (4, "in @place"),
        (2, "near @place"),
        (1, "at the @org headquarters"),
        (1, "outside @place"),
    ]),
    ("time", &[
        (3, "on @day"),
        (2, "earlier this @span"),
        (2, "late on @day"),
        (1, "in @month"),
    ]),
    ("period", &[
        (3, "this @span"),
        (2, "last @span"),
        (2, "in @month"),
        (1, "over the past @number @span_plural"),
        (1, "next @span"),
    ]),
    ("measure", &[
        (3, "@org shares"),
        (2, "the @index index"),
        (2, "oil prices"),
        (2, "unemployment"),
        (1, "inflation"),
        (1, "exports from @place"),
        (1, "the @place currency"),
    ]),
    ("say_past", &[(6, "said"), (2, "announced"), (2, "reported"), (1, "confirmed"), (1, "warned"), (1, "denied"), (1, "stated")]),
    ("act_past", &[
        (3, "approved"), (2, "rejected"), (2, "launched"), (2, "signed"), (2, "announced"),
        (1, "delayed"), (1, "criticized"), (1, "backed"), (1, "proposed"), (1, "blocked"),
        (1, "unveiled"), (1, "reviewed"), (1, "cancelled"), (1, "expanded"),
    ]),
    ("act_base", &[
        (3, "approve"), (2, "review"), (2, "sign"), (2, "support"), (2, "announce"),
        (1, "delay"), (1, "reject"), (1, "launch"), (1, "expand"), (1, "block"),
        (1, "propose"), (1, "finance"), (1, "investigate"),
    ]),
    ("passive", &[(3, "announced"), (2, "approved"), (2, "reported"), (1, "delayed"), (1, "blocked"), (1, "discovered"), (1, "signed")]),
    ("plan_verb", &[(3, "plans"), (2, "hopes"), (2, "intends"), (1, "agreed"), (1, "promised"), (1, "refused")]),
    ("modal", &[(3, "will"), (2, "would"), (2, "could"), (1, "should"), (1, "must"), (1, "may")]),
    ("moved", &[(3, "rose"), (3, "fell"), (1, "climbed"), (1, "dropped"), (1, "jumped"), (1, "slipped")]),
    ("move_base", &[(3, "rise"), (2, "fall"), (1, "recover"), (1, "stabilize")]),
    ("remained", &[(3, "remained"), (2, "is"), (1, "seemed"), (1, "became")]),
    ("judgement", &[
        (3, "unclear"), (2, "a positive step"), (2, "difficult"), (1, "unacceptable"),
        (1, "very encouraging"), (1, "a serious concern"), (1, "stable"), (1, "uncertain"),
    ]),
    ("role", &[
        (4, "minister"), (3, "president"), (3, "government"), (2, "company"), (2, "committee"),
        (2, "police"), (2, "prime minister"), (1, "central bank"), (1, "opposition"),
        (1, "chief executive"), (1, "army"), (1, "court"), (1, "mayor"), (1, "council"),
        (1, "union"), (1, "ministry"), (1, "board"), (1, "parliament"),
    ]),
    ("adj", &[
        (2, "new"), (2, "national"), (2, "foreign"), (2, "local"), (1, "former"), (1, "senior"),
        (1, "public"), (1, "economic"), (1, "regional"), (1, "federal"), (1, "major"),
        (1, "proposed"), (1, "annual"), (1, "controversial"), (1, "military"), (1, "financial"),
    ]),
    ("thing", &[
        (3, "agreement"), (3, "plan"), (3, "budget"), (2, "deal"), (2, "law"), (2, "report"),
        (2, "election"), (2, "investigation"), (2, "proposal"), (1, "contract"), (1, "merger"),
        (1, "strike"), (1, "ceasefire"), (1, "reform"), (1, "project"), (1, "policy"),
        (1, "loan"), (1, "trial"), (1, "summit"), (1, "deadline"), (1, "program"),
        (1, "tax"), (1, "bill"), (1, "offer"), (1, "visit"), (1, "vote"),
    ]),
    ("plural", &[(2, "jobs"), (2, "people"), (1, "soldiers"), (1, "workers"), (1, "homes"), (1, "schools"), (1, "cars"), (1, "flights")]),
    ("name", &[
        (2, "Smith"), (2, "Johnson"), (1, "Garcia"), (1, "Mueller"), (1, "Tanaka"), (1, "Rossi"),
        (1, "Kowalski"), (1, "Okafor"), (1, "Dubois"), (1, "Silva"), (1, "Chen"), (1, "Novak"),
        (1, "Haddad"), (1, "Larsen"), (1, "Petrov"), (1, "Moreau"),
    ]),
    ("place", &[
        (2, "London"), (2, "Washington"), (2, "Paris"), (1, "Berlin"), (1, "Tokyo"), (1, "Madrid"),
        (1, "Rome"), (1, "Cairo"), (1, "Nairobi"), (1, "Lima"), (1, "Oslo"), (1, "Warsaw"),
        (1, "Seoul"), (1, "Sydney"), (1, "Toronto"), (1, "Dublin"), (1, "Athens"), (1, "Lagos"),
    ]),
    ("org", &[(2, "bank"), (1, "airline"), (1, "carmaker"), (1, "agency"), (1, "party"), (1, "group"), (1, "network"), (1, "retailer")]),
    ("index", &[(2, "stock"), (1, "consumer"), (1, "housing"), (1, "manufacturing")]),
    ("unit", &[(2, "dollars"), (1, "euros"), (1, "points"), (1, "million"), (1, "billion")]),
    ("number", &[
        (2, "two"), (2, "three"), (2, "five"), (1, "four"), (1, "six"), (1, "ten"), (1, "12"),
        (1, "15"), (1, "20"), (1, "30"), (1, "100"), (1, "1.5"), (1, "2.5"), (1, "0.3"),
    ]),
    ("day", &[(1, "Monday"), (1, "Tuesday"), (1, "Wednesday"), (1, "Thursday"), (1, "Friday"), (1, "Saturday"), (1, "Sunday")]),
    ("month", &[(1, "January"), (1, "March"), (1, "May"), (1, "June"), (1, "September"), (1, "October"), (1, "December")]),
    ("span", &[(3, "year"), (2, "week"), (2, "month"), (1, "quarter")]),
    ("span_plural", &[(3, "years"), (2, "weeks"), (2, "months"), (1, "quarters")]),
];

fn rule(name: &str) -> &'static [(u32, &'static str)] {
    GRAMMAR
        .iter()
        .find(|r| r.0 == name)
        .unwrap_or_else(|| panic!("grammar has no rule {name}"))
        .1
}

fn expand(symbol: &str, rng: &mut ChaCha8Rng, out: &mut Vec<&'static str>) {
    let choices = rule(symbol);
    let total: u32 = choices.iter().map(|c| c.0).sum();
    let mut pick = rng.gen_range(0..total);
    let (_, body) = choices
        .iter()
        .find(|c| {
            if pick < c.0 {
                true
            } else {
                pick -= c.0;
                false
            }
        })
        .expect("weights cover the range");
    for part in body.split(' ') {
        match part.strip_prefix('@') {
            Some(sub) => expand(sub, rng, out),
            None => out.push(part),
        }
    }
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let mut words = Vec::new();
    expand("sentence", rng, &mut words);
    let mut s = join_words(words);
    if let Some(first) = s.get(..1) {
        let upper = first.to_uppercase();
        s.replace_range(..1, &upper);
    }
    s
}

/// `documents` articles of 4 to 8 sentences each.
pub fn generate(documents: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..documents)
        .map(|_| {
            let n = rng.gen_range(4..=8);
            Document {
                sentences: (0..n).map(|_| sentence(&mut rng)).collect(),
            }
        })
        .collect()
}

pub fn builtin_corpus() -> Vec<Document> {
    generate(BUILTIN_DOCUMENTS, BUILTIN_SEED)
}

/// One document per line, the format `NGramModel::train_text` reads.
pub fn to_training_text(documents: &[Document]) -> String {
    let mut out = String::new();
    for d in documents {
        out.push_str(&d.text());
        out.push('\n');
    }
    out
}

pub fn train(documents: &[Document], order: usize, alpha: f64) -> Result<NGramModel> {
    NGramModel::train(documents.iter().map(|d| split_text(&d.text())), order, alpha)
}

/// Trigram model over the built-in corpus.
pub fn builtin_model() -> NGramModel {
    train(&builtin_corpus(), BUILTIN_ORDER, BUILTIN_ALPHA).expect("built-in corpus is non-empty")
}

/// Splits running text into sentences at `.`, `!` and `?` tokens.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for word in text.split_whitespace() {
        current.push(word);
        if matches!(word.chars().last(), Some('.' | '!' | '?')) {
            sentences.push(current.join(" "));
            current.clear();
        }
    }
    if !current.is_empty() {
        sentences.push(current.join(" "));
    }
    sentences
}

/// The first `n` sentences of each document, used as cover contexts.
pub fn leading_sentences(documents: &[Document], n: usize) -> Vec<String> {
    documents
        .iter()
        .map(|d| d.sentences.iter().take(n).cloned().collect::<Vec<_>>().join(" "))
        .collect()
}

/// Documents from text with one article per non-empty line.
pub fn parse_documents(text: &str) -> Result<Vec<Document>> {
    let docs: Vec<Document> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Document {
            sentences: split_sentences(l),
        })
        .collect();
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(docs)
}
