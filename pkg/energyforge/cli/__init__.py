from energyforge.cli.main import COMMANDS, main, parse_args

__all__ = ["COMMANDS", "main", "parse_args"]
