"""Annealed entropy, Verblunsky coefficients and random representations of free groups."""

from . import blockmat, entropy, free_group, montecarlo, pdf
from .entropy import EntropyReport, h_ann, seq1, seq2, seward_sum, tempered_test, verblunsky_series
from .free_group import Alphabet, GroundedChain, ball, length_lex_chain, sphere
from .pdf import PdFunction, block_gram, haagerup, mollify, regular_character, verblunsky_extract, verblunsky_reconstruct

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "EntropyReport",
    "GroundedChain",
    "PdFunction",
    "ball",
    "block_gram",
    "blockmat",
    "entropy",
    "free_group",
    "h_ann",
    "haagerup",
    "length_lex_chain",
    "mollify",
    "montecarlo",
    "pdf",
    "regular_character",
    "seq1",
    "seq2",
    "seward_sum",
    "sphere",
    "tempered_test",
    "verblunsky_extract",
    "verblunsky_reconstruct",
    "verblunsky_series",
]
