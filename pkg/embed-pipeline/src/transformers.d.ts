// Optional runtime dependency: the real sentence encoder is loaded through a
// dynamic import and is not required to build or test (the fake encoder
// covers offline use).  Declared untyped so tsc does not demand the package.
declare module "@xenova/transformers";
