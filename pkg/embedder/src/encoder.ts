import { meanPool } from "./pooling.js";

export interface EncodedText {
  vector: Float64Array;
  truncated: boolean;
}

export interface Encoder {
  readonly id: string;
  readonly hiddenSize: number;
  encode(text: string): Promise<EncodedText>;
}

// FNV-1a, then mulberry32: cheap deterministic per-token vectors for the
// offline encoder. Not semantically meaningful, just stable.
function fnv1a(s: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < s.length; i++) {
    h ^= s.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Deterministic offline encoder, selected via model ids like "hash:768". */
export class HashEncoder implements Encoder {
  readonly id: string;
  readonly hiddenSize: number;
  private readonly maxLen: number;
  private readonly cache = new Map<string, Float32Array>();

  constructor(hiddenSize: number, maxLen: number) {
    if (hiddenSize < 1) {
      throw new Error("hash encoder needs a positive dimension");
    }
    this.id = `hash:${hiddenSize}`;
    this.hiddenSize = hiddenSize;
    this.maxLen = maxLen;
  }

  private tokenVector(token: string): Float32Array {
    let vec = this.cache.get(token);
    if (!vec) {
      const rand = mulberry32(fnv1a(token));
      vec = new Float32Array(this.hiddenSize);
      for (let d = 0; d < this.hiddenSize; d++) {
        vec[d] = rand() * 2 - 1;
      }
      this.cache.set(token, vec);
    }
    return vec;
  }

  async encode(text: string): Promise<EncodedText> {
    const tokens = text.split(/\s+/).filter((t) => t.length > 0);
    if (tokens.length === 0) {
      return { vector: new Float64Array(this.hiddenSize), truncated: false };
    }
    const truncated = tokens.length > this.maxLen;
    const kept = tokens.slice(0, this.maxLen);
    const states = kept.map((tok) => this.tokenVector(tok));
    const mask = kept.map(() => 1);
    return { vector: meanPool(states, mask), truncated };
  }
}

/** Pretrained transformer encoder: mean of last-hidden-layer token states, padding excluded. */
export class TransformerEncoder implements Encoder {
  readonly id: string;
  hiddenSize = 0;
  private readonly maxLen: number;
  private tokenizer: any;
  private model: any;

  private constructor(id: string, maxLen: number) {
    this.id = id;
    this.maxLen = maxLen;
  }

  static async load(id: string, maxLen: number): Promise<TransformerEncoder> {
    const encoder = new TransformerEncoder(id, maxLen);
    let transformers: any;
    // non-literal specifier: the backend is an optional dependency and must
    // not be resolved at compile time
    const backend = "@huggingface/transformers";
    try {
      transformers = await import(backend);
    } catch (err) {
      throw new Error(
        `encoder backend unavailable (install @huggingface/transformers, or use a hash:<dim> model id): ${err}`
      );
    }
    try {
      encoder.tokenizer = await transformers.AutoTokenizer.from_pretrained(id);
      encoder.model = await transformers.AutoModel.from_pretrained(id);
    } catch (err) {
      throw new Error(`cannot load model ${id}: ${err}`);
    }
    return encoder;
  }

  async encode(text: string): Promise<EncodedText> {
    const probe = await this.tokenizer(text);
    const fullLen = Number(probe.input_ids.dims.at(-1));
    const truncated = fullLen > this.maxLen;
    const inputs = await this.tokenizer(text, { truncation: true, max_length: this.maxLen });
    const output = await this.model(inputs);
    const hidden = output.last_hidden_state; // [1, seq, hidden]
    const [, seq, size] = hidden.dims;
    if (this.hiddenSize === 0) {
      this.hiddenSize = Number(size);
    }
    const data: Float32Array = hidden.data;
    const states: Float32Array[] = [];
    for (let t = 0; t < seq; t++) {
      states.push(data.subarray(t * size, (t + 1) * size));
    }
    const maskData = inputs.attention_mask.data;
    const mask: number[] = [];
    for (let t = 0; t < seq; t++) {
      mask.push(Number(maskData[t]));
    }
    return { vector: meanPool(states, mask), truncated };
  }
}

export async function loadEncoder(modelId: string, maxLen: number): Promise<Encoder> {
  const hashMatch = /^hash:(\d+)$/.exec(modelId);
  if (hashMatch) {
    return new HashEncoder(parseInt(hashMatch[1], 10), maxLen);
  }
  return TransformerEncoder.load(modelId, maxLen);
}
