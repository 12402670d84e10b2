import { promises as fs } from "node:fs";

// Embedding container formats shared with the engine:
//   JSONL  one {"id", "vector"} object per line
//   binary magic "DMAP", version u16 LE, dim u32 LE, count u64 LE, then per
//          record: id length u16 LE, UTF-8 id bytes, dim float32 LE values.

export interface EmbeddingRow {
  id: string;
  vector: Float64Array | number[];
}

const MAGIC = Buffer.from("DMAP", "ascii");
const VERSION = 1;

function checkRows(rows: EmbeddingRow[]): number {
  if (rows.length === 0) {
    throw new Error("empty dataset: nothing to write");
  }
  const dim = rows[0].vector.length;
  const seen = new Set<string>();
  for (const row of rows) {
    if (!row.id) {
      throw new Error("record with empty id");
    }
    if (seen.has(row.id)) {
      throw new Error(`duplicate record id ${row.id}`);
    }
    seen.add(row.id);
    if (row.vector.length !== dim) {
      throw new Error(`record ${row.id}: vector length ${row.vector.length} != dim ${dim}`);
    }
    for (const x of row.vector) {
      if (!Number.isFinite(x)) {
        throw new Error(`record ${row.id}: non-finite component`);
      }
    }
  }
  return dim;
}

export async function writeJsonl(rows: EmbeddingRow[], path: string): Promise<void> {
  checkRows(rows);
  const lines = rows.map((row) => JSON.stringify({ id: row.id, vector: Array.from(row.vector) }));
  await fs.writeFile(path, lines.join("\n") + "\n", "utf-8");
}

export async function writeBinary(rows: EmbeddingRow[], path: string): Promise<void> {
  const dim = checkRows(rows);
  const header = Buffer.alloc(18);
  MAGIC.copy(header, 0);
  header.writeUInt16LE(VERSION, 4);
  header.writeUInt32LE(dim, 6);
  header.writeBigUInt64LE(BigInt(rows.length), 10);
  const chunks: Buffer[] = [header];
  for (const row of rows) {
    const idBytes = Buffer.from(row.id, "utf-8");
    if (idBytes.length > 0xffff) {
      throw new Error(`record id too long for binary format: ${row.id.slice(0, 32)}...`);
    }
    const buf = Buffer.alloc(2 + idBytes.length + 4 * dim);
    buf.writeUInt16LE(idBytes.length, 0);
    idBytes.copy(buf, 2);
    for (let d = 0; d < dim; d++) {
      buf.writeFloatLE(Number(row.vector[d]), 2 + idBytes.length + 4 * d);
    }
    chunks.push(buf);
  }
  await fs.writeFile(path, Buffer.concat(chunks));
}

export async function readBinary(path: string): Promise<{ rows: EmbeddingRow[]; dim: number }> {
  const buf = await fs.readFile(path);
  if (buf.length < 18 || !buf.subarray(0, 4).equals(MAGIC)) {
    throw new Error(`${path}: not a DMAP embedding file`);
  }
  const version = buf.readUInt16LE(4);
  if (version !== VERSION) {
    throw new Error(`${path}: unsupported binary version ${version}`);
  }
  const dim = buf.readUInt32LE(6);
  const count = Number(buf.readBigUInt64LE(10));
  const rows: EmbeddingRow[] = [];
  let offset = 18;
  for (let i = 0; i < count; i++) {
    const idLen = buf.readUInt16LE(offset);
    offset += 2;
    const id = buf.subarray(offset, offset + idLen).toString("utf-8");
    offset += idLen;
    const vector = new Float64Array(dim);
    for (let d = 0; d < dim; d++) {
      vector[d] = buf.readFloatLE(offset);
      offset += 4;
    }
    rows.push({ id, vector });
  }
  if (rows.length === 0) {
    throw new Error(`${path}: empty dataset`);
  }
  return { rows, dim };
}

export async function readJsonl(path: string): Promise<{ rows: EmbeddingRow[]; dim: number }> {
  const text = await fs.readFile(path, "utf-8");
  const rows: EmbeddingRow[] = [];
  for (const line of text.split("\n")) {
    if (!line.trim()) {
      continue;
    }
    const obj = JSON.parse(line);
    rows.push({ id: String(obj.id), vector: obj.vector });
  }
  const dim = checkRows(rows);
  return { rows, dim };
}
