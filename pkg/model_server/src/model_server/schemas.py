"""Wire schemas for the three inference endpoints."""

from __future__ import annotations

from pydantic import BaseModel, Field


class SpanRef(BaseModel):
    start: int = Field(ge=0)
    end: int


class ReadRequest(BaseModel):
    question: str
    passage: str
    candidates: list[SpanRef]


class ReadResponse(BaseModel):
    scores: list[float]


class WireTriple(BaseModel):
    head: str
    relation: str
    tail: str
    tail_is_literal: bool = False
    tail_datatype: str | None = None


class VerbalizeUnit(BaseModel):
    triples: list[WireTriple]
    pivot: str | None = None


class VerbalizeRequest(BaseModel):
    units: list[VerbalizeUnit]


class VerbalizeResponse(BaseModel):
    sentences: list[str]


class EmbedRequest(BaseModel):
    texts: list[str]


class EmbedResponse(BaseModel):
    vectors: list[list[float]]
