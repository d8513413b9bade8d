"""Template-generated news-like documents with recurring named entities.

All filler words are lower case, so the capitalised tokens are exactly the
entity names; every document repeats at least one entity.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .domain import Document
from .encoder import tokenize

PEOPLE = """
Ann Bob Carla Dmitri Elena Farid Greta Hiro Ines Jonas Kira Liam Mona Nadia Oscar
Priya Quinn Rosa Samir Tara Umar Vera Wanda Xavier Yusuf Zoe Abel Bianca Cyrus Dana
Emil Fiona Gideon Hana Ivan Jada Kofi Lena Marco Nina Otto Paula Rafael Sofia Tomas
Ulla Victor Willa Yara Zane Alma Boris Clara Dario Edith Felix Gwen Hugo Ida Jasper
""".split()

PLACES = [
    "Paris", "Lagos", "Oslo", "Lima", "Cairo", "Quito", "Riga", "Hanoi", "Dublin", "Accra",
    "New York", "San Diego", "Buenos Aires", "Cape Town", "Hong Kong", "Tel Aviv",
]

ORGS = ["Acme", "Globex", "Initech", "Umbrella", "Stark", "Wayne", "Hooli", "Vandelay"]

TEMPLATES = [
    "{A} met {B} in {P} .",
    "{A} said that {B} would visit {P} next week .",
    "yesterday {A} called {B} about the plan .",
    "{A} lives in {P} with a cat .",
    "later , {B} thanked {A} for the help .",
    "the report from {P} mentioned {A} twice .",
    "{A} and {B} talked about the weather in {P} .",
    "according to {A} , the market in {P} was busy .",
    "{A} smiled .",
    "everyone in {P} knew {A} .",
    "{A} joined {O} last spring .",
    "a spokesman for {O} praised {A} .",
    "{O} opened an office in {P} .",
    "shares of {O} rose after {A} spoke .",
    "{B} disagreed with {A} on the budget .",
    "in {P} , {A} gave a short speech .",
]

FILLER = [
    "the weather was cold .",
    "it rained for most of the day .",
    "nobody expected the result .",
    "the meeting ran late into the evening .",
    "prices went up again .",
    "the trains were delayed by an hour .",
]


@dataclass
class SyntheticConfig:
    count: int = 600
    seed: int = 7
    min_sentences: int = 3
    max_sentences: int = 24
    filler_rate: float = 0.25
    fixed_tokens: int | None = None  # if set, every document has exactly this many tokens

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if not 1 <= self.min_sentences <= self.max_sentences:
            raise ValueError("need 1 <= min_sentences <= max_sentences")
        if not 0.0 <= self.filler_rate <= 1.0:
            raise ValueError("filler_rate must lie in [0, 1]")
        if self.fixed_tokens is not None and self.fixed_tokens < 6:
            raise ValueError("fixed_tokens must be >= 6")


def _pick(rng: random.Random, pool: list[str], exclude=()) -> str:
    """Zipf-like choice favouring early entries, so entities recur."""
    choices = [x for x in pool if x not in exclude]
    weights = [1.0 / (i + 1) for i in range(len(choices))]
    return rng.choices(choices, weights)[0]


def _n_tokens(sentences: list[str]) -> int:
    return sum(len(s.split()) for s in sentences)


def _has_repeat(sentences: list[str], entities: list[str]) -> bool:
    text = " " + " ".join(sentences) + " "
    return any(text.count(f" {e} ") >= 2 for e in entities)


def generate_document(rng: random.Random, doc_id: str, cfg: SyntheticConfig) -> Document:
    people = rng.sample(PEOPLE, rng.randint(2, 4))
    places = rng.sample(PLACES, rng.randint(1, 2))
    orgs = rng.sample(ORGS, 1)
    n = rng.randint(cfg.min_sentences, cfg.max_sentences)
    sentences: list[str] = []
    while len(sentences) < n or (cfg.fixed_tokens and _n_tokens(sentences) < cfg.fixed_tokens):
        if rng.random() < cfg.filler_rate:
            sentences.append(rng.choice(FILLER))
            continue
        template = rng.choice(TEMPLATES)
        a = _pick(rng, people)
        b = _pick(rng, people, exclude=(a,))
        sentences.append(template.format(A=a, B=b, P=_pick(rng, places), O=orgs[0]))
    entities = people + places + orgs
    if cfg.fixed_tokens:
        # templates separate every token by one space, so truncation is exact
        sentences = " ".join(sentences).split()[:cfg.fixed_tokens]
        if not _has_repeat(sentences, entities):
            sentences = f"{people[0]} smiled . {people[0]} smiled .".split() + sentences[:cfg.fixed_tokens - 6]
    elif not _has_repeat(sentences, entities):
        sentences.append(f"{people[0]} smiled .")
        sentences.insert(0, f"{people[0]} smiled .")
    text = " ".join(sentences)
    return tokenize(text, doc_id)


def generate_corpus(cfg: SyntheticConfig) -> list[Document]:
    rng = random.Random(cfg.seed)
    return [generate_document(rng, f"syn-{cfg.seed}-{i:05d}", cfg) for i in range(cfg.count)]


def split_corpus(docs: list[Document], n_train: int, n_dev: int, n_test: int) -> dict[str, list[Document]]:
    if n_train + n_dev + n_test > len(docs):
        raise ValueError("split sizes exceed corpus size")
    return {
        "train": docs[:n_train],
        "dev": docs[n_train:n_train + n_dev],
        "test": docs[n_train + n_dev:n_train + n_dev + n_test],
    }
