export function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>()
  for (let i = 0; i < argv.length; i++) {
    if (!argv[i].startsWith('--')) continue
    const key = argv[i].slice(2)
    const val = argv[i + 1]
    if (val === undefined || val.startsWith('--')) {
      flags.set(key, 'true')
    } else {
      flags.set(key, val)
      i++
    }
  }
  return flags
}

export function requireFlag(flags: Map<string, string>, name: string): string {
  const v = flags.get(name)
  if (!v) {
    console.error(`missing required flag --${name}`)
    process.exit(2)
  }
  return v
}
