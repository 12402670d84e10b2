export { preprocess, cleanText } from "./preprocess.js";
export { meanPool } from "./pooling.js";
export { HashEncoder, TransformerEncoder, loadEncoder } from "./encoder.js";
export type { Encoder, EncodedText } from "./encoder.js";
export { writeJsonl, writeBinary, readJsonl, readBinary } from "./vectorIo.js";
export type { EmbeddingRow } from "./vectorIo.js";
export { readPostsJsonl } from "./posts.js";
export type { Post } from "./posts.js";
export { embedTexts } from "./embed.js";
export type { EmbedJob, EmbedSummary } from "./embed.js";
export { main as cliMain } from "./cli.js";
