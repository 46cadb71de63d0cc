import { describe, expect, it } from "vitest";

import type {
  AcceptRequest,
  AcceptResponse,
  PredictRequest,
  PredictResponse,
  PredictiveService,
  SessionTotals,
} from "../src/api.js";
import { Session, normalizeWords } from "../src/session.js";

/**
 * In-memory stand-in that implements the service contract exactly:
 * accept totals accumulate |word|-1 per accepted word (corrected
 * server-side), and predict filters candidates to the top-N frequent
 * vocabulary words when frequent_limit is set.
 */
class MockService implements PredictiveService {
  sessions = new Map<string, SessionTotals>();
  predictLog: PredictRequest[] = [];
  private nextSession = 1;

  constructor(
    public vocabByFrequency: string[],
    public ranker: (context: string[]) => string[] = () => [],
  ) {}

  async predict(req: PredictRequest): Promise<PredictResponse> {
    this.predictLog.push(structuredClone(req));
    let ranked = this.ranker(req.context);
    if (ranked.length === 0) {
      ranked = this.vocabByFrequency;
    }
    let allowed: Set<string> | null = null;
    if (req.frequent_limit !== undefined) {
      allowed = new Set(this.vocabByFrequency.slice(0, req.frequent_limit));
    }
    const candidates = [];
    for (const word of ranked) {
      if (allowed && !allowed.has(word)) continue;
      candidates.push({ word, probability: 1 / (candidates.length + 2) });
      if (candidates.length === req.k) break;
    }
    return { candidates, model: req.model ?? "mock", excluded_oov: false };
  }

  async accept(req: AcceptRequest): Promise<AcceptResponse> {
    const id = req.session ?? `s${this.nextSession++}`;
    const created = !this.sessions.has(id);
    if (created) {
      this.sessions.set(id, { accepts: 0, keys_saved: 0, keys_typed: 0 });
    }
    const totals = this.sessions.get(id)!;
    const expected = Math.max(req.word.length - 1, 0);
    totals.accepts += 1;
    totals.keys_typed += 1;
    totals.keys_saved += expected;
    return {
      session: id,
      created,
      corrected: req.saved_chars !== expected,
      saved_chars: expected,
      totals: { ...totals },
    };
  }
}

async function typeWord(session: Session, word: string): Promise<void> {
  for (const ch of word) {
    await session.onKeystroke(ch);
  }
  await session.onKeystroke(" ");
}

describe("normalizeWords", () => {
  it("mirrors the corpus rules", () => {
    expect(normalizeWords("The lungs are CLEAR.")).toEqual([
      "the",
      "lungs",
      "are",
      "clear",
    ]);
    expect(normalizeWords("T2 lesion, 3cm")).toEqual(["t", "lesion", "cm"]);
    expect(normalizeWords("   ")).toEqual([]);
  });
});

describe("scripted typing sessions", () => {
  it("keeps keys_saved equal to the accepted-word sum and the server totals", async () => {
    const script = [
      "the", "lungs", "are", "clear", "there", "is", "no", "evidence",
      "of", "focal", "airspace", "disease", "the", "heart", "remains",
      "normal", "in", "size", "without", "effusion",
    ];
    expect(script).toHaveLength(20);
    // the service offers the upcoming word at exactly these indices;
    // the index of the word being suggested is the committed-word count
    const offerAt = new Set([1, 3, 5, 7, 9, 12, 15, 18]);
    const service = new MockService(["the", "of", "is"], (context) => {
      const idx = context.length;
      return offerAt.has(idx) && idx < script.length
        ? [script[idx], "noise"]
        : ["noise"];
    });
    const session = new Session(service, { k: 3 });
    await session.refreshSuggestions();

    const acceptedIdx: number[] = [];
    for (let position = 0; position < script.length; position++) {
      const word = script[position];
      const rank = session.suggestions.findIndex((c) => c.word === word) + 1;
      if (rank > 0 && acceptedIdx.length < 8) {
        await session.onAccept(rank);
        acceptedIdx.push(position);
      } else {
        await typeWord(session, word);
      }
    }

    expect(acceptedIdx).toHaveLength(8);
    const acceptedWords = acceptedIdx.map((i) => script[i]);
    const expectedSaved = acceptedWords.reduce((n, w) => n + w.length - 1, 0);
    expect(session.keysSaved).toBe(expectedSaved);
    expect(session.wordsAccepted).toBe(8);
    const totals = service.sessions.get(session.sessionId!);
    expect(totals).toBeDefined();
    expect(totals!.keys_saved).toBe(expectedSaved);
    expect(totals!.accepts).toBe(8);

    // keys pressed = every typed character and delimiter, plus one per accept
    const typedChars = script
      .filter((_, i) => !acceptedIdx.includes(i))
      .reduce((n, w) => n + w.length + 1, 0);
    expect(session.keysPressed).toBe(typedChars + 8);

    // running discount mirrors the evaluation formula over committed words
    const chars = script.reduce((n, w) => n + w.length, 0);
    const dsc = script.reduce(
      (n, w, i) => n + (acceptedIdx.includes(i) ? 1 : w.length),
      0,
    );
    expect(session.runningKd).toBeCloseTo(1 - dsc / chars, 12);
  });

  it("never renders a suggestion outside the frequent set when limited", async () => {
    const vocab = Array.from({ length: 120 }, (_, i) => `word${i}`);
    const service = new MockService(vocab);
    const session = new Session(service, { k: 5, frequentLimit: 50 });
    await session.refreshSuggestions();

    const allowed = new Set(vocab.slice(0, 50));
    const rendered: string[] = [];
    for (let i = 0; i < 100; i++) {
      rendered.push(...session.suggestions.map((c) => c.word));
      await typeWord(session, vocab[(i * 7) % vocab.length]);
    }
    expect(rendered.length).toBeGreaterThan(0);
    for (const word of rendered) {
      expect(allowed.has(word)).toBe(true);
    }
    for (const req of service.predictLog) {
      expect(req.frequent_limit).toBe(50);
    }
  });
});

describe("session behavior", () => {
  it("requests suggestions on word boundaries with normalized context", async () => {
    const service = new MockService(["alpha", "beta"]);
    const session = new Session(service);
    for (const ch of "The") await session.onKeystroke(ch);
    expect(service.predictLog).toHaveLength(0); // mid-word: no request yet
    await session.onKeystroke(" ");
    expect(service.predictLog).toHaveLength(1);
    expect(service.predictLog[0].context).toEqual(["the"]);
  });

  it("treats non-printable keys as no-ops", async () => {
    const service = new MockService(["x"]);
    const session = new Session(service);
    await session.onKeystroke("Backspace");
    await session.onKeystroke("ArrowLeft");
    expect(session.keysPressed).toBe(0);
    expect(session.text).toBe("");
  });

  it("accept with an empty suggestion bar is a no-op", async () => {
    const service = new MockService(["x"]);
    const session = new Session(service);
    await session.onAccept(1);
    expect(session.keysPressed).toBe(0);
    expect(session.wordsAccepted).toBe(0);
    expect(session.text).toBe("");
  });

  it("clears suggestions and flags the banner when the service is down", async () => {
    const service = new MockService(["x"]);
    const session = new Session(service);
    await typeWord(session, "hello");
    expect(session.suggestions.length).toBeGreaterThan(0);
    service.predict = async () => {
      throw new Error("connection refused");
    };
    await typeWord(session, "world");
    expect(session.suggestions).toEqual([]);
    expect(session.serviceDown).toBe(true);
    expect(session.text).toBe("hello world ");
    expect(session.keysPressed).toBe("hello world ".length);
  });

  it("discards stale responses by sequence number", async () => {
    const service = new MockService(["fresh"]);
    let release: (() => void) | null = null;
    const slowResponse: PredictResponse = {
      candidates: [{ word: "stale", probability: 0.5 }],
      model: "mock",
      excluded_oov: false,
    };
    const original = service.predict.bind(service);
    let call = 0;
    service.predict = async (req) => {
      call += 1;
      if (call === 1) {
        await new Promise<void>((resolve) => {
          release = resolve;
        });
        return slowResponse;
      }
      return original(req);
    };
    const session = new Session(service);
    const first = session.refreshSuggestions();
    const second = session.refreshSuggestions();
    await second;
    release!();
    await first;
    expect(session.suggestions.map((c) => c.word)).toEqual(["fresh"]);
  });

  it("switching model keeps text and counters; reset zeroes counters", async () => {
    const service = new MockService(["alpha"]);
    const session = new Session(service, { k: 3 });
    await typeWord(session, "report");
    await session.onAccept(1);
    const textBefore = session.text;
    await session.onSettingsChange({ model: "other" });
    expect(session.text).toBe(textBefore);
    expect(session.wordsAccepted).toBe(1);
    expect(service.predictLog.at(-1)!.model).toBe("other");
    session.reset();
    expect(session.keysPressed).toBe(0);
    expect(session.keysSaved).toBe(0);
    expect(session.runningKd).toBe(0);
    expect(session.text).toBe(textBefore); // text survives a counter reset
    expect(session.sessionId).toBeNull();
  });

  it("server totals win on reconciliation mismatch", async () => {
    const service = new MockService(["alpha"]);
    const session = new Session(service, { k: 1 });
    await session.refreshSuggestions();
    await session.onAccept(1);
    // simulate local drift, then accept again and reconcile
    session.keysSaved += 3;
    await session.refreshSuggestions();
    await session.onAccept(1);
    const totals = service.sessions.get(session.sessionId!)!;
    expect(session.keysSaved).toBe(totals.keys_saved);
  });
});
