"""8x8 bitmap glyphs for printable ASCII (0x20-0x7E), one hex string per glyph.

Each glyph is 8 bytes, one per row top to bottom; bit 7 is the leftmost pixel.
"""

GLYPHS = (
    "0000000000000000",  # ' '
    "0060606060006000",  # '!'
    "0050505000000000",  # '"'
    "5050f85050f85050",  # '#'
    "78c8f07818d8f020",  # '$'
    "e0a8f02078a83800",  # '%'
    "0070c060f8b0f800",  # '&'
    "3020400000000000",  # "'"
    "1020606060602010",  # '('
    "4020303030302040",  # ')'
    "20f0609000000000",  # '*'
    "002020f820200000",  # '+'
    "0000000000003020",  # ','
    "000000f800000000",  # '-'
    "0000000000006000",  # '.'
    "0808101020204040",  # '/'
    "70d8d8d8d8d87000",  # '0'
    "30f030303030fc00",  # '1'
    "70d8183060d8f800",  # '2'
    "70d8187018d87000",  # '3'
    "183858d8fc181800",  # '4'
    "f8c0f0d81898f000",  # '5'
    "70d8c0f0d8d87000",  # '6'
    "f8d8183030606000",  # '7'
    "70d8d870d8d87000",  # '8'
    "70d8d87818d87000",  # '9'
    "0000006000006000",  # ':'
    "0000006000006040",  # ';'
    "003060c060300000",  # '<'
    "0000f000f0000000",  # '='
    "0060301830600000",  # '>'
    "0070983060006000",  # '?'
    "70c898a8a89cc070",  # '@'
    "00f07050f8d8dc00",  # 'A'
    "00f0d8f0d8d8f000",  # 'B'
    "0078d8c0c0d87000",  # 'C'
    "00f0d8d8d8d8f000",  # 'D'
    "00f8c0f0c0d8f800",  # 'E'
    "00f8c0f0c0c0e000",  # 'F'
    "0070d8c0f8d87800",  # 'G'
    "00dcd8f8d8d8dc00",  # 'H'
    "00f060606060f000",  # 'I'
    "00783030b0b0e000",  # 'J'
    "00d8d0e0f0d8ec00",  # 'K'
    "00e0c0c0c0d8f800",  # 'L'
    "0088d8d8f8a8a800",  # 'M'
    "00dce8e8d8d8c800",  # 'N'
    "0070d8d8d8d87000",  # 'O'
    "00f0d8d8f0c0e000",  # 'P'
    "0070d8d8d8d87018",  # 'Q'
    "00f0d8d8f0d8ec00",  # 'R'
    "0078c8f03898f000",  # 'S'
    "00f868606060f000",  # 'T'
    "00dcd8d8d8d87000",  # 'U'
    "00dcd85070702000",  # 'V'
    "00aca8a8f8705000",  # 'W'
    "00cc78303078cc00",  # 'X'
    "00cccc7830307800",  # 'Y'
    "00f8d83060d8f800",  # 'Z'
    "7060606060606070",  # '['
    "8080404020201010",  # '\\'
    "7030303030303070",  # ']'
    "2070d80000000000",  # '^'
    "0000000000000000",  # '_'
    "6020100000000000",  # '`'
    "000070d878d8fc00",  # 'a'
    "c0c0f0d8d8d8f000",  # 'b'
    "000070d8c0d87000",  # 'c'
    "381878d8d8d87c00",  # 'd'
    "000070d8f8c07800",  # 'e'
    "3860f8606060f800",  # 'f'
    "00006cd8d8d87818",  # 'g'
    "c0c0f0d8d8d8d800",  # 'h'
    "3000f0303030fc00",  # 'i'
    "3000f03030303030",  # 'j'
    "c0c0d8f0e0f0dc00",  # 'k'
    "f03030303030fc00",  # 'l'
    "0000f0f8a8a8a800",  # 'm'
    "0000b0d8d8d8d800",  # 'n'
    "000070d8d8d87000",  # 'o'
    "0000f0d8d8d8f0c0",  # 'p'
    "00006cd8d8d87818",  # 'q'
    "0000dc746060f000",  # 'r'
    "000078e0781cf800",  # 's'
    "6060f860606c3800",  # 't'
    "0000d8d8d8d87c00",  # 'u'
    "0000d8d870702000",  # 'v'
    "0000aca8f8785000",  # 'w'
    "0000ec783078dc00",  # 'x'
    "0000dcd8d8507060",  # 'y'
    "0000f8b060d8f800",  # 'z'
    "1830306030303018",  # '{'
    "0020202020202020",  # '|'
    "c0606030606060c0",  # '}'
    "000068b000000000",  # '~'
)
