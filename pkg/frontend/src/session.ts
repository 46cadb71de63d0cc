/**
 * Predictive-typing session state: text, live suggestions, counters.
 *
 * Pure logic, no DOM. Keystroke accounting mirrors the evaluation
 * discount: a manually typed word costs its full character length,
 * an accepted suggestion costs exactly one keystroke, and the running
 * discount is 1 - dsc/chars over the committed words. The server's
 * session totals win on any disagreement.
 */

import type {
  Candidate,
  PredictiveService,
  SessionTotals,
} from "./api.js";

export interface SessionSettings {
  model?: string;
  k: number;
  frequentLimit?: number;
}

const WORD_DELIMITERS = new Set([" ", "\n", "\t"]);

/** Client-side mirror of the corpus normalization rules. */
export function normalizeWords(text: string): string[] {
  const cleaned = text
    .replace(/\d/gu, "")
    .replace(/[!-/:-@[-`{-~]/g, "")
    .toLowerCase();
  return cleaned.split(/\s+/).filter((w) => w.length > 0);
}

export class Session {
  text = "";
  suggestions: Candidate[] = [];
  serviceDown = false;
  sessionId: string | null = null;
  serverTotals: SessionTotals | null = null;

  keysPressed = 0;
  keysSaved = 0;
  wordsAccepted = 0;
  wordsTyped = 0;

  private dscSum = 0;
  private charSum = 0;
  private requestSeq = 0;

  constructor(
    private readonly service: PredictiveService,
    public settings: SessionSettings = { k: 5 },
  ) {}

  /** Discount over committed words so far; 0 before anything commits. */
  get runningKd(): number {
    return this.charSum === 0 ? 0 : 1 - this.dscSum / this.charSum;
  }

  get counters() {
    return {
      keysPressed: this.keysPressed,
      keysSaved: this.keysSaved,
      wordsAccepted: this.wordsAccepted,
      runningKd: this.runningKd,
    };
  }

  /** Completed words of the current text, normalized for the service. */
  contextWords(): string[] {
    const lastBreak = Math.max(
      this.text.lastIndexOf(" "),
      this.text.lastIndexOf("\n"),
      this.text.lastIndexOf("\t"),
    );
    const completed = lastBreak < 0 ? "" : this.text.slice(0, lastBreak + 1);
    return normalizeWords(completed);
  }

  /**
   * Handle one typed character. Non-printable input leaves every
   * counter untouched; a word delimiter commits the current word and
   * requests fresh suggestions.
   */
  async onKeystroke(ch: string): Promise<void> {
    if (ch.length !== 1) return;
    this.keysPressed += 1;
    const endedWord = WORD_DELIMITERS.has(ch)
      ? this.currentPartialWord()
      : null;
    this.text += ch;
    if (WORD_DELIMITERS.has(ch)) {
      if (endedWord) {
        this.commitTypedWord(endedWord);
      }
      await this.refreshSuggestions();
    }
  }

  /** Accept the suggestion at 1-based rank with a single keystroke. */
  async onAccept(rank: number): Promise<void> {
    const chosen = this.suggestions[rank - 1];
    if (!chosen) return;
    const word = chosen.word;
    this.keysPressed += 1;
    this.text += word + " ";
    this.keysSaved += Math.max(word.length - 1, 0);
    this.wordsAccepted += 1;
    this.dscSum += 1;
    this.charSum += word.length;
    try {
      const resp = await this.service.accept({
        session: this.sessionId,
        word,
        saved_chars: Math.max(word.length - 1, 0),
      });
      this.sessionId = resp.session;
      this.serverTotals = resp.totals;
      if (resp.totals.keys_saved !== this.keysSaved) {
        this.keysSaved = resp.totals.keys_saved; // server totals win
      }
    } catch {
      this.serviceDown = true;
    }
    await this.refreshSuggestions();
  }

  /** New settings apply to every later predict call; counters persist. */
  async onSettingsChange(patch: Partial<SessionSettings>): Promise<void> {
    this.settings = { ...this.settings, ...patch };
    await this.refreshSuggestions();
  }

  /** Zero all counters and start a fresh server session; text stays. */
  reset(): void {
    this.keysPressed = 0;
    this.keysSaved = 0;
    this.wordsAccepted = 0;
    this.wordsTyped = 0;
    this.dscSum = 0;
    this.charSum = 0;
    this.sessionId = null;
    this.serverTotals = null;
  }

  private currentPartialWord(): string | null {
    const tail = this.text.split(/[\s]+/).pop() ?? "";
    return tail.length > 0 ? tail : null;
  }

  private commitTypedWord(word: string): void {
    this.wordsTyped += 1;
    this.dscSum += word.length;
    this.charSum += word.length;
  }

  /**
   * Ask the service for suggestions at the current word boundary. At
   * most one request is authoritative: responses to superseded
   * contexts are discarded by sequence number.
   */
  async refreshSuggestions(): Promise<void> {
    const seq = ++this.requestSeq;
    try {
      const resp = await this.service.predict({
        context: this.contextWords(),
        k: this.settings.k,
        model: this.settings.model,
        frequent_limit: this.settings.frequentLimit,
      });
      if (seq !== this.requestSeq) return; // stale response
      this.suggestions = resp.candidates;
      this.serviceDown = false;
    } catch {
      if (seq !== this.requestSeq) return;
      this.suggestions = [];
      this.serviceDown = true;
    }
  }
}
